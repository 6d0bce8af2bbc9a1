//! Command-line front end: categorize, stats, eval, errors, bias, synth,
//! and convert subcommands over the canonical JSON formats.
//!
//! Exit codes: 0 on success, 1 on input or usage errors, 2 on internal
//! invariant violations. Reports are written atomically (temp file +
//! rename) and are byte-identical across runs and thread counts.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use hoidiag::bias::{build_frequencies, object_bias_table, top_k_table, FrequencyOptions};
use hoidiag::category::{
    categorize_dataset, category_statistics, consensus, merge_consensus, parse_label_file,
    CategorizeOptions, CategoryAssignment, CategoryStats, Disagreement, SceneCategory,
};
use hoidiag::convert::{convert_external_dataset, ExternalFormat};
use hoidiag::decompose::{sweep, ErrorSweep};
use hoidiag::error::{Error, Result};
use hoidiag::eval::{assignment_map, evaluate, EvalReport, EvalSettings};
use hoidiag::instance::{resolve_instances, ResolveOptions, SceneGraphDump};
use hoidiag::model::{Dataset, PredictionSet};
use hoidiag::synth::{
    generate, GeometryBounds, InjectionPlan, SynthCategory, SynthSpec,
};
use hoidiag::vocab::Vocabulary;

#[derive(Parser)]
#[command(
    name = "hoidiag",
    version,
    about = "Diagnostics for human-object interaction detection: scene taxonomy, \
             pair-matching mAP, false-positive decomposition, and bias tables"
)]
struct Cli {
    /// Worker threads (0 = one per core). Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Serialize)]
struct OutArgs {
    /// Output directory (falls back to $HOIDIAG_OUT, then the working
    /// directory).
    #[arg(short, long)]
    out_dir: Option<PathBuf>,

    /// Record the configuration and input digests into each report.
    #[arg(long)]
    manifest: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Assign each ground-truth image a scene category and write
    /// categories.json.
    Categorize {
        /// Canonical ground-truth JSON.
        #[arg(long)]
        gt: PathBuf,
        /// IoU at which annotation boxes merge into one instance.
        #[arg(long, default_value_t = hoidiag::DEFAULT_MERGE_IOU)]
        merge_iou: f64,
        /// Annotator label file(s); a strict majority overrides the rules.
        #[arg(long)]
        labels: Vec<PathBuf>,
        /// Also write scene_graphs.json with the resolved instances.
        #[arg(long)]
        dump_scene_graphs: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print the per-category image and HOI counts of a categories.json.
    Stats {
        #[arg(long)]
        categories: PathBuf,
    },
    /// Match predictions against ground truth and write report.json.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// categories.json; computed rule-based when omitted.
        #[arg(long)]
        categories: Option<PathBuf>,
        /// Pair-matching IoU threshold.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Exclude invisible GT pairs from matching.
        #[arg(long)]
        strict_visible: bool,
        #[arg(long, default_value_t = hoidiag::DEFAULT_MERGE_IOU)]
        merge_iou: f64,
        /// Also write per_class.csv with one row per HOI class.
        #[arg(long)]
        per_class_csv: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Decompose false positives over a confidence-threshold grid and
    /// write errors.csv and errors.json.
    Errors {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        categories: Option<PathBuf>,
        /// Grid as start:end:step or a comma list, e.g. 0.0:0.9:0.1.
        #[arg(long, default_value = "0.0:0.9:0.1")]
        thresholds: String,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long)]
        strict_visible: bool,
        #[arg(long, default_value_t = hoidiag::DEFAULT_MERGE_IOU)]
        merge_iou: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Frequency and object-conditioned verb-bias tables joined with AP.
    Bias {
        /// Canonical training ground truth.
        #[arg(long)]
        train: PathBuf,
        /// Canonical test ground truth.
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        categories: Option<PathBuf>,
        /// Evaluation report.json files; one AP column per model.
        #[arg(long)]
        report: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// Minimum per-category test instances for bias rows.
        #[arg(long, default_value_t = 5)]
        min_test_instances: usize,
        /// Categories to tabulate (default: all with instances).
        #[arg(long)]
        category: Vec<SceneCategory>,
        /// Objects (names or ids) for bias tables (default: all).
        #[arg(long)]
        object: Vec<String>,
        /// Count no_interaction classes in the verb-share basis.
        #[arg(long)]
        shares_include_no_interaction: bool,
        /// Drop invisible annotations from training counts.
        #[arg(long)]
        train_exclude_invisible: bool,
        #[arg(long, default_value_t = hoidiag::DEFAULT_MERGE_IOU)]
        merge_iou: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Generate synthetic scenes with labeled error injections.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scene counts per category, e.g. SPSO:10,SPMO:5,A:3,C:4.
        #[arg(long)]
        mix: String,
        /// Person range for multi-person categories, e.g. 2:4.
        #[arg(long, default_value = "2:3")]
        persons: String,
        /// Error injections per scene, e.g.
        /// human_box=1,object_box=1,verb=2,pairing=1,duplicate=1.
        #[arg(long, default_value = "")]
        inject: String,
        /// Do not cover every GT annotation with a true positive.
        #[arg(long)]
        skip_tp_cover: bool,
        #[arg(long, default_value_t = 1000.0)]
        width: f64,
        #[arg(long, default_value_t = 1000.0)]
        height: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Convert a community annotation export into the canonical format.
    Convert {
        #[arg(long)]
        input: PathBuf,
        /// External layout tag (hico-community-v1).
        #[arg(long, default_value = "hico-community-v1")]
        format: String,
        /// Vocabulary JSON for the export.
        #[arg(long)]
        vocab: PathBuf,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "canonical.json")]
        output: String,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let threads = cli.threads;
    let outcome = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::contract(format!("cannot build a {threads}-thread pool: {e}")))
        .and_then(|pool| pool.install(|| dispatch(cli.command)));

    match outcome {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(if e.is_input_error() { 1 } else { 2 });
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Categorize { gt, merge_iou, labels, dump_scene_graphs, out } => {
            cmd_categorize(&gt, merge_iou, &labels, dump_scene_graphs, &out)
        }
        Command::Stats { categories } => cmd_stats(&categories),
        Command::Eval {
            gt,
            pred,
            categories,
            iou,
            strict_visible,
            merge_iou,
            per_class_csv,
            out,
        } => cmd_eval(&gt, &pred, categories.as_deref(), iou, strict_visible, merge_iou, per_class_csv, &out),
        Command::Errors {
            gt,
            pred,
            categories,
            thresholds,
            iou,
            strict_visible,
            merge_iou,
            out,
        } => cmd_errors(&gt, &pred, categories.as_deref(), &thresholds, iou, strict_visible, merge_iou, &out),
        Command::Bias {
            train,
            test,
            categories,
            report,
            top_k,
            min_test_instances,
            category,
            object,
            shares_include_no_interaction,
            train_exclude_invisible,
            merge_iou,
            out,
        } => cmd_bias(BiasArgs {
            train,
            test,
            categories,
            report,
            top_k,
            min_test_instances,
            category,
            object,
            shares_include_no_interaction,
            train_exclude_invisible,
            merge_iou,
            out,
        }),
        Command::Synth { seed, mix, persons, inject, skip_tp_cover, width, height, out } => {
            cmd_synth(seed, &mix, &persons, &inject, skip_tp_cover, width, height, &out)
        }
        Command::Convert { input, format, vocab, output, out } => {
            cmd_convert(&input, &format, &vocab, &output, &out)
        }
    }
}

// ---------------------------------------------------------------------------
// output plumbing

/// Flag values are user input: reject bad ones as input errors before any
/// core call can trip an invariant (which would exit 2 instead of 1).
fn check_fraction(name: &str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if !(lo..=hi).contains(&value) || !value.is_finite() {
        return Err(Error::schema(format!("--{name} must lie in [{lo}, {hi}], got {value}")));
    }
    Ok(())
}

fn out_dir(out: &OutArgs) -> PathBuf {
    out.out_dir
        .clone()
        .or_else(|| std::env::var_os("HOIDIAG_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Every input must be readable before any computation starts.
fn fail_fast(paths: &[&Path]) -> Result<()> {
    for path in paths {
        std::fs::File::open(path).map_err(|e| Error::io(*path, e))?;
    }
    Ok(())
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    tmp.persist(&path)
        .map_err(|e| Error::io(&path, e.error))?;
    Ok(path)
}

fn digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("sha256:{}", hex::encode(Sha256::digest(&bytes))))
}

fn build_manifest(command: &str, config: &impl Serialize, inputs: &[&Path]) -> Result<Value> {
    let mut digests = serde_json::Map::new();
    for path in inputs {
        digests.insert(path.display().to_string(), Value::String(digest(path)?));
    }
    Ok(json!({
        "tool": "hoidiag",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": serde_json::to_value(config).expect("config serializes"),
        "inputs": Value::Object(digests),
    }))
}

/// Serializes a report with an optional manifest attached. Always routed
/// through `serde_json::Value`, so key order (and thus the byte output)
/// does not depend on whether a manifest is present.
fn render_report(report: impl Serialize, manifest: Option<&Value>) -> String {
    let mut value = serde_json::to_value(report).expect("report serializes");
    if let Some(m) = manifest {
        value
            .as_object_mut()
            .expect("reports are objects")
            .insert("manifest".into(), m.clone());
    }
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

fn csv_bytes(rows: &[Vec<String>]) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.write_record(row).expect("csv rows are well-formed");
    }
    writer.into_inner().expect("csv buffer")
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// shared loading

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_path(path)
}

fn load_predictions(path: &Path, vocab: &Vocabulary) -> Result<PredictionSet> {
    PredictionSet::from_path(path, vocab)
}

/// The categories.json layout.
#[derive(Serialize, Deserialize)]
struct CategoriesFile {
    assignments: Vec<CategoryAssignment>,
    stats: CategoryStats,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    disagreements: Vec<Disagreement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<Value>,
}

fn load_categories(path: &Path) -> Result<CategoriesFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Assignments from a categories.json, or computed rule-based.
fn assignments_for(
    gt: &Dataset,
    categories: Option<&Path>,
    merge_iou: f64,
) -> Result<Vec<CategoryAssignment>> {
    match categories {
        Some(path) => Ok(load_categories(path)?.assignments),
        None => categorize_dataset(gt, &CategorizeOptions { merge_iou }),
    }
}

// ---------------------------------------------------------------------------
// categorize & stats

fn cmd_categorize(
    gt_path: &Path,
    merge_iou: f64,
    label_paths: &[PathBuf],
    dump_scene_graphs: bool,
    out: &OutArgs,
) -> Result<()> {
    check_fraction("merge-iou", merge_iou, 0.5, 1.0)?;
    let mut inputs: Vec<&Path> = vec![gt_path];
    inputs.extend(label_paths.iter().map(PathBuf::as_path));
    fail_fast(&inputs)?;

    let gt = load_dataset(gt_path)?;
    let rule_based = categorize_dataset(&gt, &CategorizeOptions { merge_iou })?;

    let (assignments, disagreements) = if label_paths.is_empty() {
        (rule_based, Vec::new())
    } else {
        let files = label_paths
            .iter()
            .map(|p| parse_label_file(p))
            .collect::<Result<Vec<_>>>()?;
        let voted = consensus(&files)?;
        merge_consensus(&rule_based, &voted)
    };

    let stats = category_statistics(&assignments);
    let dir = out_dir(out);

    let manifest = if out.manifest {
        let config = json!({ "merge_iou": merge_iou, "labels": label_paths, "dump_scene_graphs": dump_scene_graphs });
        Some(build_manifest("categorize", &config, &inputs)?)
    } else {
        None
    };

    let file = CategoriesFile {
        assignments,
        stats: stats.clone(),
        disagreements,
        manifest: None,
    };
    let path = write_atomic(&dir, "categories.json", render_report(&file, manifest.as_ref()).as_bytes())?;

    if dump_scene_graphs {
        let graphs: Vec<SceneGraphDump> = gt
            .images
            .iter()
            .map(|image| {
                resolve_instances(
                    image,
                    &gt.vocabulary,
                    &ResolveOptions::for_categorization(merge_iou),
                )
                .map(|g| g.dump())
            })
            .collect::<Result<_>>()?;
        write_atomic(&dir, "scene_graphs.json", render_report(&graphs, None).as_bytes())?;
    }

    println!("categorize: {} images -> {} ({})", stats.total_images, summary_counts(&stats), path.display());
    Ok(())
}

fn summary_counts(stats: &CategoryStats) -> String {
    stats
        .per_category
        .iter()
        .map(|(cat, n)| format!("{cat} {}", n.images))
        .collect::<Vec<_>>()
        .join(" | ")
}

fn cmd_stats(categories: &Path) -> Result<()> {
    fail_fast(&[categories])?;
    let file = load_categories(categories)?;
    let stats = category_statistics(&file.assignments);

    println!("{:<10} {:>8} {:>14}", "category", "images", "hoi_instances");
    for (cat, count) in &stats.per_category {
        println!("{:<10} {:>8} {:>14}", cat.name(), count.images, count.hoi_instances);
    }
    println!("{:<10} {:>8}", "total", stats.total_images);
    println!(
        "single-person {} | multi-person {} | excluded {}",
        stats.single_person_images, stats.multi_person_images, stats.excluded_images
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    gt_path: &Path,
    pred_path: &Path,
    categories: Option<&Path>,
    iou: f64,
    strict_visible: bool,
    merge_iou: f64,
    per_class_csv: bool,
    out: &OutArgs,
) -> Result<()> {
    check_fraction("iou", iou, 0.05, 0.95)?;
    check_fraction("merge-iou", merge_iou, 0.5, 1.0)?;
    let mut inputs = vec![gt_path, pred_path];
    if let Some(c) = categories {
        inputs.push(c);
    }
    fail_fast(&inputs)?;

    let gt = load_dataset(gt_path)?;
    let preds = load_predictions(pred_path, &gt.vocabulary)?;
    let assignments = assignments_for(&gt, categories, merge_iou)?;
    let settings = EvalSettings { iou_threshold: iou, strict_visible };
    let report = evaluate(&gt, &preds, &assignment_map(&assignments), &settings)?;

    let dir = out_dir(out);
    let manifest = if out.manifest {
        let config = json!({
            "iou": iou, "strict_visible": strict_visible, "merge_iou": merge_iou,
            "categories": categories.map(|p| p.display().to_string()),
        });
        Some(build_manifest("eval", &config, &inputs)?)
    } else {
        None
    };
    let path = write_atomic(&dir, "report.json", render_report(&report, manifest.as_ref()).as_bytes())?;

    if per_class_csv {
        let mut rows = vec![vec![
            "hoi_id".into(),
            "verb".into(),
            "object".into(),
            "gt_count".into(),
            "prediction_count".into(),
            "ap".into(),
        ]];
        for (hoi_id, class) in &report.per_class_ap {
            rows.push(vec![
                hoi_id.to_string(),
                gt.vocabulary.verb_name(gt.vocabulary.verb_of(*hoi_id)).to_string(),
                gt.vocabulary.object_name(gt.vocabulary.object_of(*hoi_id)).to_string(),
                class.gt_count.to_string(),
                class.prediction_count.to_string(),
                fmt_f64(class.ap),
            ]);
        }
        write_atomic(&dir, "per_class.csv", &csv_bytes(&rows))?;
    }

    let pct = |v: f64| format!("{:.2}", v * 100.0);
    let opt_pct = |v: Option<f64>| v.map(pct).unwrap_or_else(|| "n/a".into());
    println!(
        "eval[{}]: mAP {} over {} classes | single-person {} | multi-person {} | gap {} ({})",
        report.model_name,
        pct(report.map_overall),
        report.evaluated_classes,
        opt_pct(report.single_person_map),
        opt_pct(report.multi_person_map),
        opt_pct(report.single_multi_gap),
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// errors

fn parse_threshold_grid(spec: &str) -> Result<Vec<f64>> {
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::schema(format!("bad threshold value '{s}'")))
    };
    let values: Vec<f64> = if spec.contains(',') {
        spec.split(',').map(parse).collect::<Result<_>>()?
    } else if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::schema(format!(
                "threshold grid '{spec}' must be start:end:step or a comma list"
            )));
        }
        let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if step <= 0.0 || end < start {
            return Err(Error::schema(format!("bad threshold grid '{spec}'")));
        }
        let n = ((end - start) / step).round() as usize;
        (0..=n)
            .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
            .collect()
    } else {
        vec![parse(spec)?]
    };
    if values.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::schema(format!("thresholds in '{spec}' must lie in [0, 1]")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::schema(format!(
            "thresholds in '{spec}' must be strictly ascending"
        )));
    }
    Ok(values)
}

#[allow(clippy::too_many_arguments)]
fn cmd_errors(
    gt_path: &Path,
    pred_path: &Path,
    categories: Option<&Path>,
    thresholds: &str,
    iou: f64,
    strict_visible: bool,
    merge_iou: f64,
    out: &OutArgs,
) -> Result<()> {
    let mut inputs = vec![gt_path, pred_path];
    if let Some(c) = categories {
        inputs.push(c);
    }
    fail_fast(&inputs)?;

    check_fraction("iou", iou, 0.05, 0.95)?;
    check_fraction("merge-iou", merge_iou, 0.5, 1.0)?;
    let grid = parse_threshold_grid(thresholds)?;
    let gt = load_dataset(gt_path)?;
    let preds = load_predictions(pred_path, &gt.vocabulary)?;
    let assignments = assignments_for(&gt, categories, merge_iou)?;
    let settings = EvalSettings { iou_threshold: iou, strict_visible };
    let result = sweep(&gt, &preds, &assignment_map(&assignments), &grid, &settings)?;

    let dir = out_dir(out);
    let manifest = if out.manifest {
        let config = json!({
            "thresholds": grid, "iou": iou, "strict_visible": strict_visible,
            "merge_iou": merge_iou,
            "categories": categories.map(|p| p.display().to_string()),
        });
        Some(build_manifest("errors", &config, &inputs)?)
    } else {
        None
    };

    write_atomic(&dir, "errors.csv", &csv_bytes(&errors_csv_rows(&result)))?;
    let path = write_atomic(&dir, "errors.json", render_report(&result, manifest.as_ref()).as_bytes())?;

    println!(
        "errors: {} thresholds x {} groups, {} FPs at the lowest threshold ({})",
        result.thresholds.len(),
        result.per_category.len() + 1,
        result.overall.first().map(|c| c.fp_count).unwrap_or(0),
        path.display()
    );
    Ok(())
}

fn errors_csv_rows(result: &ErrorSweep) -> Vec<Vec<String>> {
    let mut rows = vec![vec![
        "category".into(),
        "threshold".into(),
        "flag".into(),
        "count".into(),
        "proportion_of_fp".into(),
    ]];
    let mut emit = |scope: &str, cells: &[hoidiag::decompose::ErrorCell]| {
        for cell in cells {
            rows.push(vec![
                scope.into(),
                fmt_f64(cell.threshold),
                "fp_count".into(),
                cell.fp_count.to_string(),
                fmt_f64(if cell.fp_count > 0 { 1.0 } else { 0.0 }),
            ]);
            for flag in hoidiag::FLAG_NAMES {
                rows.push(vec![
                    scope.into(),
                    fmt_f64(cell.threshold),
                    flag.into(),
                    cell.flag_counts[flag].to_string(),
                    fmt_f64(cell.proportions[flag]),
                ]);
            }
        }
    };
    emit("overall", &result.overall);
    for (cat, cells) in &result.per_category {
        emit(cat.name(), cells);
    }
    rows
}

// ---------------------------------------------------------------------------
// bias

struct BiasArgs {
    train: PathBuf,
    test: PathBuf,
    categories: Option<PathBuf>,
    report: Vec<PathBuf>,
    top_k: usize,
    min_test_instances: usize,
    category: Vec<SceneCategory>,
    object: Vec<String>,
    shares_include_no_interaction: bool,
    train_exclude_invisible: bool,
    merge_iou: f64,
    out: OutArgs,
}

fn cmd_bias(args: BiasArgs) -> Result<()> {
    if args.top_k == 0 {
        return Err(Error::schema("--top-k must be at least 1"));
    }
    check_fraction("merge-iou", args.merge_iou, 0.5, 1.0)?;
    let mut inputs: Vec<&Path> = vec![&args.train, &args.test];
    if let Some(c) = &args.categories {
        inputs.push(c);
    }
    inputs.extend(args.report.iter().map(PathBuf::as_path));
    fail_fast(&inputs)?;

    let train = load_dataset(&args.train)?;
    let test = load_dataset(&args.test)?;
    let assignments = assignments_for(&test, args.categories.as_deref(), args.merge_iou)?;
    let reports: Vec<EvalReport> = args
        .report
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::json(p, e))
        })
        .collect::<Result<_>>()?;
    let report_refs: Vec<&EvalReport> = reports.iter().collect();

    let opts = FrequencyOptions {
        train_include_invisible: !args.train_exclude_invisible,
        shares_include_no_interaction: args.shares_include_no_interaction,
        ..FrequencyOptions::default()
    };
    let freq = build_frequencies(&train, &test, &assignment_map(&assignments), &opts)?;
    let vocab = &test.vocabulary;

    let categories: Vec<SceneCategory> = if args.category.is_empty() {
        freq.test_counts.keys().copied().filter(|c| *c != SceneCategory::Excluded).collect()
    } else {
        args.category.clone()
    };

    // top-k table
    let mut topk_rows = vec![{
        let mut header = vec![
            "category".to_string(),
            "rank".into(),
            "hoi_id".into(),
            "verb".into(),
            "object".into(),
            "train_count".into(),
            "test_count".into(),
        ];
        header.extend(reports.iter().map(|r| format!("ap_{}", r.model_name)));
        header
    }];
    for category in &categories {
        let rows = top_k_table(&freq, &report_refs, vocab, *category, args.top_k)?;
        for row in rows {
            let mut record = vec![
                category.name().to_string(),
                row.rank.to_string(),
                row.hoi_id.to_string(),
                row.verb.clone(),
                row.object.clone(),
                row.train_count.to_string(),
                row.test_count.to_string(),
            ];
            record.extend(row.ap.iter().map(|a| a.map(fmt_f64).unwrap_or_default()));
            topk_rows.push(record);
        }
    }

    // object-conditioned bias tables
    let object_ids: Vec<u32> = if args.object.is_empty() {
        vocab.object_categories().iter().map(|o| o.object_id).collect()
    } else {
        args.object
            .iter()
            .map(|spec| {
                if let Ok(id) = spec.parse::<u32>() {
                    return Ok(id);
                }
                vocab
                    .object_categories()
                    .iter()
                    .find(|o| o.name == *spec)
                    .map(|o| o.object_id)
                    .ok_or_else(|| Error::schema(format!("unknown object '{spec}'")))
            })
            .collect::<Result<_>>()?
    };

    let mut bias_rows = vec![{
        let mut header = vec![
            "category".to_string(),
            "object".into(),
            "hoi_id".into(),
            "verb".into(),
            "train_count".into(),
            "conditional_share".into(),
            "test_count".into(),
        ];
        header.extend(reports.iter().map(|r| format!("ap_{}", r.model_name)));
        header
    }];
    let mut tables = Vec::new();
    for category in &categories {
        for object_id in &object_ids {
            let table = object_bias_table(
                &freq,
                &report_refs,
                vocab,
                *object_id,
                *category,
                args.min_test_instances,
            )?;
            if table.rows.is_empty() {
                continue;
            }
            for row in &table.rows {
                let mut record = vec![
                    category.name().to_string(),
                    table.object.clone(),
                    row.hoi_id.to_string(),
                    row.verb.clone(),
                    row.train_count.to_string(),
                    row.conditional_share.map(fmt_f64).unwrap_or_default(),
                    row.test_count.to_string(),
                ];
                record.extend(row.ap.iter().map(|a| a.map(fmt_f64).unwrap_or_default()));
                bias_rows.push(record);
            }
            tables.push(table);
        }
    }

    let dir = out_dir(&args.out);
    let manifest = if args.out.manifest {
        let config = json!({
            "top_k": args.top_k,
            "min_test_instances": args.min_test_instances,
            "shares_include_no_interaction": args.shares_include_no_interaction,
            "train_exclude_invisible": args.train_exclude_invisible,
        });
        Some(build_manifest("bias", &config, &inputs)?)
    } else {
        None
    };

    write_atomic(&dir, "topk.csv", &csv_bytes(&topk_rows))?;
    write_atomic(&dir, "bias.csv", &csv_bytes(&bias_rows))?;
    let payload = json!({ "tables": tables, "frequency_options": {
        "train_include_invisible": opts.train_include_invisible,
        "shares_include_no_interaction": opts.shares_include_no_interaction,
    }});
    let path = write_atomic(&dir, "bias.json", render_report(&payload, manifest.as_ref()).as_bytes())?;

    let spearman_note = tables
        .iter()
        .flat_map(|t| {
            t.spearman.iter().filter_map(move |(model, rho)| {
                rho.map(|r| format!("{}/{}[{}] {:.2}", t.category, t.object, model, r))
            })
        })
        .take(4)
        .collect::<Vec<_>>()
        .join(", ");
    println!(
        "bias: {} top-k rows, {} bias rows over {} categories ({}){}",
        topk_rows.len() - 1,
        bias_rows.len() - 1,
        categories.len(),
        path.display(),
        if spearman_note.is_empty() { String::new() } else { format!(" | spearman: {spearman_note}") }
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// synth

fn parse_mix(spec: &str) -> Result<Vec<(SynthCategory, usize)>> {
    let mut mix = Vec::new();
    for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (name, count) = part
            .split_once(':')
            .ok_or_else(|| Error::schema(format!("mix entry '{part}' must be CATEGORY:COUNT")))?;
        let category: SynthCategory = name.trim().parse()?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| Error::schema(format!("bad scene count in '{part}'")))?;
        mix.push((category, count));
    }
    if mix.is_empty() {
        return Err(Error::schema("mix must name at least one category"));
    }
    Ok(mix)
}

fn parse_person_range(spec: &str) -> Result<(usize, usize)> {
    let (lo, hi) = spec
        .split_once(':')
        .ok_or_else(|| Error::schema(format!("person range '{spec}' must be LO:HI")))?;
    let lo = lo.trim().parse().map_err(|_| Error::schema("bad person range"))?;
    let hi = hi.trim().parse().map_err(|_| Error::schema("bad person range"))?;
    Ok((lo, hi))
}

fn parse_injections(spec: &str, cover: bool) -> Result<InjectionPlan> {
    let mut plan = InjectionPlan { cover_true_positives: cover, ..InjectionPlan::none() };
    for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (name, count) = part
            .split_once('=')
            .ok_or_else(|| Error::schema(format!("injection '{part}' must be TYPE=COUNT")))?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| Error::schema(format!("bad injection count in '{part}'")))?;
        match name.trim() {
            "human_box" => plan.human_box = count,
            "object_box" => plan.object_box = count,
            "object_class" => plan.object_class = count,
            "verb" => plan.verb = count,
            "pairing" => plan.pairing = count,
            "duplicate" => plan.duplicate = count,
            other => return Err(Error::schema(format!("unknown injection type '{other}'"))),
        }
    }
    Ok(plan)
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    seed: u64,
    mix: &str,
    persons: &str,
    inject: &str,
    skip_tp_cover: bool,
    width: f64,
    height: f64,
    out: &OutArgs,
) -> Result<()> {
    let spec = SynthSpec {
        seed,
        category_mix: parse_mix(mix)?,
        person_range: parse_person_range(persons)?,
        injections: parse_injections(inject, !skip_tp_cover)?,
        bounds: GeometryBounds { width, height },
    };
    let (gt, preds, log) = generate(&spec)?;

    let dir = out_dir(out);
    write_atomic(&dir, "gt.json", gt.to_json_pretty().as_bytes())?;
    write_atomic(&dir, "predictions.json", preds.to_json_pretty().as_bytes())?;
    write_atomic(&dir, "truth_log.json", log.to_json_pretty().as_bytes())?;
    let vocab_json =
        serde_json::to_string_pretty(&gt.vocabulary).expect("vocabulary serializes");
    write_atomic(&dir, "vocab.json", vocab_json.as_bytes())?;

    println!(
        "synth: {} scenes, {} predictions -> {}/gt.json, predictions.json, truth_log.json, vocab.json",
        spec.scene_count(),
        preds.predictions.len(),
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// convert

fn cmd_convert(
    input: &Path,
    format: &str,
    vocab_path: &Path,
    output: &str,
    out: &OutArgs,
) -> Result<()> {
    fail_fast(&[input, vocab_path])?;
    let format = ExternalFormat::from_tag(format)?;
    let vocab = Vocabulary::from_path(vocab_path)?;
    let dataset = convert_external_dataset(input, format, &vocab)?;

    let dir = out_dir(out);
    let path = write_atomic(&dir, output, dataset.to_json_pretty().as_bytes())?;
    println!("convert: {} images -> {}", dataset.images.len(), path.display());
    Ok(())
}
