//! Training-frequency and object-conditioned verb-bias statistics, joined
//! with per-class AP.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::category::SceneCategory;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::model::Dataset;
use crate::vocab::Vocabulary;

/// Which annotations enter which counts.
#[derive(Debug, Clone, Copy)]
pub struct FrequencyOptions {
    /// Invisible training annotations still carry training signal.
    pub train_include_invisible: bool,
    /// no_interaction classes swamp per-object verb distributions, so the
    /// share basis drops them unless asked for.
    pub shares_include_no_interaction: bool,
    /// Test counts mirror the categorization scope by default.
    pub test_include_invisible: bool,
    pub test_include_no_interaction: bool,
}

impl Default for FrequencyOptions {
    fn default() -> Self {
        FrequencyOptions {
            train_include_invisible: true,
            shares_include_no_interaction: false,
            test_include_invisible: false,
            test_include_no_interaction: false,
        }
    }
}

/// Instance counts per HOI class and per object-conditioned verb.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyTable {
    /// Training instances per hoi class.
    pub train_counts: BTreeMap<u32, usize>,
    /// Test instances per category per hoi class.
    pub test_counts: BTreeMap<SceneCategory, BTreeMap<u32, usize>>,
    /// Training instances per object per verb (share basis).
    pub object_verb_train: BTreeMap<u32, BTreeMap<u32, usize>>,
}

impl FrequencyTable {
    pub fn train_count(&self, hoi_id: u32) -> usize {
        self.train_counts.get(&hoi_id).copied().unwrap_or(0)
    }

    pub fn test_count(&self, category: SceneCategory, hoi_id: u32) -> usize {
        self.test_counts
            .get(&category)
            .and_then(|m| m.get(&hoi_id))
            .copied()
            .unwrap_or(0)
    }

    /// Share of a verb among the object's training interactions. `None`
    /// when the object has no training instances in the share basis.
    pub fn conditional_share(&self, object_id: u32, verb_id: u32) -> Option<f64> {
        let verbs = self.object_verb_train.get(&object_id)?;
        let total: usize = verbs.values().sum();
        if total == 0 {
            return None;
        }
        Some(verbs.get(&verb_id).copied().unwrap_or(0) as f64 / total as f64)
    }
}

/// Counts training and per-category test instances.
///
/// Both datasets must carry the same vocabulary.
pub fn build_frequencies(
    train_gt: &Dataset,
    test_gt: &Dataset,
    assignments: &BTreeMap<String, SceneCategory>,
    opts: &FrequencyOptions,
) -> Result<FrequencyTable> {
    if train_gt.vocabulary != test_gt.vocabulary {
        return Err(Error::schema(
            "training and test datasets carry different vocabularies",
        ));
    }
    let vocab = &train_gt.vocabulary;

    let mut train_counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut object_verb_train: BTreeMap<u32, BTreeMap<u32, usize>> = BTreeMap::new();
    for image in &train_gt.images {
        for ann in &image.annotations {
            if !opts.train_include_invisible && ann.invisible {
                continue;
            }
            *train_counts.entry(ann.hoi_id).or_insert(0) += 1;
            if opts.shares_include_no_interaction || !vocab.is_no_interaction_hoi(ann.hoi_id) {
                *object_verb_train
                    .entry(vocab.object_of(ann.hoi_id))
                    .or_default()
                    .entry(vocab.verb_of(ann.hoi_id))
                    .or_insert(0) += 1;
            }
        }
    }

    let mut test_counts: BTreeMap<SceneCategory, BTreeMap<u32, usize>> = BTreeMap::new();
    for image in &test_gt.images {
        let Some(category) = assignments.get(&image.image_id) else {
            continue;
        };
        for ann in &image.annotations {
            if !opts.test_include_invisible && ann.invisible {
                continue;
            }
            if !opts.test_include_no_interaction && vocab.is_no_interaction_hoi(ann.hoi_id) {
                continue;
            }
            *test_counts
                .entry(*category)
                .or_default()
                .entry(ann.hoi_id)
                .or_insert(0) += 1;
        }
    }

    Ok(FrequencyTable { train_counts, test_counts, object_verb_train })
}

/// One row of the top-k frequency table.
#[derive(Debug, Clone, Serialize)]
pub struct TopKRow {
    pub rank: usize,
    pub hoi_id: u32,
    pub verb: String,
    pub object: String,
    pub train_count: usize,
    pub test_count: usize,
    /// AP within the category, one entry per supplied report.
    pub ap: Vec<Option<f64>>,
}

/// Top-k HOI classes of a category by test frequency (ties by hoi id),
/// joined with per-model category AP.
pub fn top_k_table(
    freq: &FrequencyTable,
    reports: &[&EvalReport],
    vocab: &Vocabulary,
    category: SceneCategory,
    k: usize,
) -> Result<Vec<TopKRow>> {
    if k == 0 {
        return Err(Error::contract("top_k_table requires k >= 1"));
    }
    let counts = freq
        .test_counts
        .get(&category)
        .filter(|m| !m.is_empty())
        .ok_or_else(|| {
            Error::schema(format!("category {category} contains no HOI instances"))
        })?;

    let mut order: Vec<(&u32, &usize)> = counts.iter().collect();
    order.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    order.truncate(k);

    Ok(order
        .into_iter()
        .enumerate()
        .map(|(i, (hoi_id, test_count))| TopKRow {
            rank: i + 1,
            hoi_id: *hoi_id,
            verb: vocab.verb_name(vocab.verb_of(*hoi_id)).to_string(),
            object: vocab.object_name(vocab.object_of(*hoi_id)).to_string(),
            train_count: freq.train_count(*hoi_id),
            test_count: *test_count,
            ap: reports.iter().map(|r| category_ap(r, category, *hoi_id)).collect(),
        })
        .collect())
}

fn category_ap(report: &EvalReport, category: SceneCategory, hoi_id: u32) -> Option<f64> {
    report
        .per_category_class_ap
        .get(&category)
        .and_then(|m| m.get(&hoi_id))
        .map(|c| c.ap)
}

/// One verb row of an object-conditioned bias table.
#[derive(Debug, Clone, Serialize)]
pub struct ObjectBiasRow {
    pub hoi_id: u32,
    pub verb_id: u32,
    pub verb: String,
    pub train_count: usize,
    pub conditional_share: Option<f64>,
    pub test_count: usize,
    pub ap: Vec<Option<f64>>,
}

/// Verb distribution of one object within one category, sorted by training
/// count. The Spearman correlation between training count and AP is
/// descriptive output, never an assertion.
#[derive(Debug, Clone, Serialize)]
pub struct ObjectBiasTable {
    pub object_id: u32,
    pub object: String,
    pub category: SceneCategory,
    pub min_test_instances: usize,
    pub rows: Vec<ObjectBiasRow>,
    /// (model name, Spearman rho over the emitted rows).
    pub spearman: Vec<(String, Option<f64>)>,
}

/// Verbs of an object with at least `min_test_instances` test instances in
/// the category, joined with per-model AP.
pub fn object_bias_table(
    freq: &FrequencyTable,
    reports: &[&EvalReport],
    vocab: &Vocabulary,
    object_id: u32,
    category: SceneCategory,
    min_test_instances: usize,
) -> Result<ObjectBiasTable> {
    if !vocab.object_categories().iter().any(|o| o.object_id == object_id) {
        return Err(Error::schema(format!("object {object_id} is not in the vocabulary")));
    }

    let mut rows: Vec<ObjectBiasRow> = vocab
        .hoi_classes()
        .iter()
        .filter(|h| h.object_id == object_id)
        .filter_map(|h| {
            let test_count = freq.test_count(category, h.hoi_id);
            if test_count < min_test_instances || test_count == 0 {
                return None;
            }
            Some(ObjectBiasRow {
                hoi_id: h.hoi_id,
                verb_id: h.verb_id,
                verb: vocab.verb_name(h.verb_id).to_string(),
                train_count: freq.train_count(h.hoi_id),
                conditional_share: freq.conditional_share(object_id, h.verb_id),
                test_count,
                ap: reports.iter().map(|r| category_ap(r, category, h.hoi_id)).collect(),
            })
        })
        .collect();
    rows.sort_by(|a, b| b.train_count.cmp(&a.train_count).then_with(|| a.hoi_id.cmp(&b.hoi_id)));

    let spearman = reports
        .iter()
        .enumerate()
        .map(|(model_idx, report)| {
            let pairs: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|row| row.ap[model_idx].map(|ap| (row.train_count as f64, ap)))
                .collect();
            (report.model_name.clone(), spearman_rho(&pairs))
        })
        .collect();

    Ok(ObjectBiasTable {
        object_id,
        object: vocab.object_name(object_id).to_string(),
        category,
        min_test_instances,
        rows,
        spearman,
    })
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// fewer than two pairs or either side is constant.
pub fn spearman_rho(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let xs = average_ranks(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let ys = average_ranks(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    pearson(&xs, &ys)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
