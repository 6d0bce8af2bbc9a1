//! False-positive decomposition into six interpretable error types, and
//! confidence-threshold sweeps of the resulting distributions.
//!
//! With predicted object class `o`, verb `v`, and IoU threshold `t`:
//!
//! * `human_box` - no GT human box in the image reaches IoU > t.
//! * `object_box` - no GT object box of any class reaches IoU > t.
//! * `object_class` - some GT object box localizes, but none of class `o`.
//! * `pairing` - both endpoints localize onto valid instances of the right
//!   kinds, but no annotated class-`o` pair joins them.
//! * `verb` - an annotated class-`o` pair joins them, but none of those
//!   pairs carries verb `v`.
//! * `duplicate` - a joined pair carries verb `v`, and every such pair is
//!   already claimed by a higher-ranked prediction.
//!
//! Every false positive raises at least one flag; true positives raise
//! none. `object_box` and `object_class` are mutually exclusive by
//! construction; `human_box` can co-occur with either object-side flag.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::category::SceneCategory;
use crate::error::{Error, Result};
use crate::eval::{match_dataset, EvalSettings, GtView, Verdict};
use crate::geometry::iou;
use crate::model::{check_prediction_images, Dataset, Prediction, PredictionSet};
use crate::vocab::Vocabulary;

/// Canonical flag order used in reports and co-occurrence matrices.
pub const FLAG_NAMES: [&str; 6] = [
    "human_box",
    "object_box",
    "object_class",
    "verb",
    "pairing",
    "duplicate",
];

/// Six-bit error attribution for one false positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorFlags {
    pub human_box: bool,
    pub object_box: bool,
    pub object_class: bool,
    pub verb: bool,
    pub pairing: bool,
    pub duplicate: bool,
}

impl ErrorFlags {
    pub fn none() -> Self {
        ErrorFlags::default()
    }

    pub fn any(&self) -> bool {
        self.as_array().iter().any(|&b| b)
    }

    /// Flags in [`FLAG_NAMES`] order.
    pub fn as_array(&self) -> [bool; 6] {
        [
            self.human_box,
            self.object_box,
            self.object_class,
            self.verb,
            self.pairing,
            self.duplicate,
        ]
    }

    pub fn set_names(&self) -> Vec<&'static str> {
        FLAG_NAMES
            .iter()
            .zip(self.as_array())
            .filter(|(_, set)| *set)
            .map(|(name, _)| *name)
            .collect()
    }
}

/// Attributes one false positive to its error types.
///
/// `matched` holds the `(image_id, annotation index)` pairs claimed by
/// true positives under the same match state the verdict came from.
/// Calling this on a true positive is a contract violation.
pub fn decompose_fp(
    pred: &Prediction,
    verdict: Verdict,
    view: &GtView,
    matched: &BTreeSet<(String, usize)>,
    vocab: &Vocabulary,
    iou_threshold: f64,
) -> Result<ErrorFlags> {
    if verdict == Verdict::Tp {
        return Err(Error::contract("decompose_fp called on a true positive"));
    }
    let image_idx = view
        .image_index(&pred.image_id)
        .ok_or_else(|| Error::contract(format!("prediction references unknown image {}", pred.image_id)))?;
    let pred_object = vocab.object_of(pred.hoi_id);
    let pred_verb = vocab.verb_of(pred.hoi_id);

    let mut human_localized = false;
    let mut object_localized = false;
    let mut object_class_localized = false;
    // annotated pairs of the predicted object class that both endpoints join
    let mut joined_verbs: Vec<(usize, u32)> = Vec::new();

    for (ann_index, ann) in view.kept_annotations(image_idx) {
        let iou_h = iou(&pred.human_box, &ann.human_box);
        let iou_o = iou(&pred.object_box, &ann.object_box);
        if iou_h > iou_threshold {
            human_localized = true;
        }
        if iou_o > iou_threshold {
            object_localized = true;
            if vocab.object_of(ann.hoi_id) == pred_object {
                object_class_localized = true;
            }
        }
        if vocab.object_of(ann.hoi_id) == pred_object && iou_h.min(iou_o) > iou_threshold {
            joined_verbs.push((ann_index, vocab.verb_of(ann.hoi_id)));
        }
    }

    let mut flags = ErrorFlags::none();
    flags.human_box = !human_localized;
    flags.object_box = !object_localized;
    flags.object_class = object_localized && !object_class_localized;

    if joined_verbs.is_empty() {
        flags.pairing = human_localized && object_localized && object_class_localized;
    } else {
        let same_verb: Vec<usize> = joined_verbs
            .iter()
            .filter(|(_, verb)| *verb == pred_verb)
            .map(|(ann_index, _)| *ann_index)
            .collect();
        if same_verb.is_empty() {
            flags.verb = true;
        } else {
            // a false positive cannot join an unclaimed pair of its own class
            for ann_index in &same_verb {
                if !matched.contains(&(pred.image_id.clone(), *ann_index)) {
                    return Err(Error::contract(format!(
                        "match state inconsistent: FP prediction joins unclaimed pair \
                         (image {}, annotation {ann_index})",
                        pred.image_id
                    )));
                }
            }
            flags.duplicate = true;
        }
    }

    debug_assert!(flags.any(), "every false positive must raise a flag");
    Ok(flags)
}

/// Aggregated flags for one (scope, threshold) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCell {
    pub threshold: f64,
    pub fp_count: usize,
    /// Counts keyed by flag name.
    pub flag_counts: BTreeMap<&'static str, usize>,
    /// Flag count over FP count; zero when the cell has no FPs.
    pub proportions: BTreeMap<&'static str, f64>,
    /// Symmetric co-fire counts in [`FLAG_NAMES`] order; the diagonal
    /// repeats `flag_counts`.
    pub cooccurrence: Vec<Vec<usize>>,
}

impl ErrorCell {
    fn new(threshold: f64) -> Self {
        ErrorCell {
            threshold,
            fp_count: 0,
            flag_counts: FLAG_NAMES.iter().map(|n| (*n, 0)).collect(),
            proportions: FLAG_NAMES.iter().map(|n| (*n, 0.0)).collect(),
            cooccurrence: vec![vec![0; 6]; 6],
        }
    }

    fn add(&mut self, flags: &ErrorFlags) {
        self.fp_count += 1;
        let bits = flags.as_array();
        for (i, name) in FLAG_NAMES.iter().enumerate() {
            if bits[i] {
                *self.flag_counts.get_mut(name).expect("all flags present") += 1;
                for (j, _) in FLAG_NAMES.iter().enumerate() {
                    if bits[j] {
                        self.cooccurrence[i][j] += 1;
                    }
                }
            }
        }
    }

    fn finalize(&mut self) {
        if self.fp_count > 0 {
            for name in FLAG_NAMES {
                self.proportions
                    .insert(name, self.flag_counts[name] as f64 / self.fp_count as f64);
            }
        }
    }
}

/// Flag distributions per confidence threshold, overall and per category.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorSweep {
    pub thresholds: Vec<f64>,
    pub flag_order: Vec<&'static str>,
    pub overall: Vec<ErrorCell>,
    pub per_category: BTreeMap<SceneCategory, Vec<ErrorCell>>,
}

/// Decomposes the false positives of one match state (all predictions with
/// `score >= min_score`). Returns the per-prediction flags alongside the
/// aggregation scope key (the image's category, when assigned).
fn decompose_at(
    view: &GtView,
    preds: &PredictionSet,
    categories: &BTreeMap<String, SceneCategory>,
    settings: &EvalSettings,
    min_score: f64,
) -> Result<Vec<(usize, Option<SceneCategory>, ErrorFlags)>> {
    let matches = match_dataset(view, preds, settings.iou_threshold, min_score);
    let matched = matches.matched_annotations();
    let mut out = Vec::new();
    for outcome in matches.by_class.values().flatten() {
        if outcome.verdict != Verdict::Fp {
            continue;
        }
        let pred = &preds.predictions[outcome.prediction_index];
        let flags = decompose_fp(
            pred,
            outcome.verdict,
            view,
            &matched,
            &view.dataset.vocabulary,
            settings.iou_threshold,
        )?;
        out.push((
            outcome.prediction_index,
            categories.get(&pred.image_id).copied(),
            flags,
        ));
    }
    out.sort_by_key(|(index, _, _)| *index);
    Ok(out)
}

/// Per-prediction decomposition at the base evaluation (no score cutoff).
/// Entry `i` is `None` for true positives.
pub fn decompose_predictions(
    gt: &Dataset,
    preds: &PredictionSet,
    settings: &EvalSettings,
) -> Result<Vec<Option<ErrorFlags>>> {
    check_prediction_images(preds, gt)?;
    let view = GtView::build(gt, settings.strict_visible);
    let rows = decompose_at(&view, preds, &BTreeMap::new(), settings, 0.0)?;
    let mut out = vec![None; preds.predictions.len()];
    for (index, _, flags) in rows {
        out[index] = Some(flags);
    }
    Ok(out)
}

/// Re-matches at every confidence threshold and decomposes the surviving
/// false positives, grouped overall and per scene category.
///
/// Matching is re-run per threshold so duplicate/TP status is always
/// consistent with the prediction set that survives the cutoff.
pub fn sweep(
    gt: &Dataset,
    preds: &PredictionSet,
    categories: &BTreeMap<String, SceneCategory>,
    thresholds: &[f64],
    settings: &EvalSettings,
) -> Result<ErrorSweep> {
    if thresholds.is_empty() {
        return Err(Error::contract("sweep requires at least one threshold"));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("sweep thresholds must be strictly ascending"));
    }
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::contract("sweep thresholds must lie in [0, 1]"));
    }
    check_prediction_images(preds, gt)?;

    let view = GtView::build(gt, settings.strict_visible);
    let per_threshold: Vec<Vec<(usize, Option<SceneCategory>, ErrorFlags)>> = thresholds
        .par_iter()
        .map(|&t| decompose_at(&view, preds, categories, settings, t))
        .collect::<Result<_>>()?;

    let mut overall = Vec::with_capacity(thresholds.len());
    let mut per_category: BTreeMap<SceneCategory, Vec<ErrorCell>> = BTreeMap::new();
    for cat in categories.values() {
        per_category
            .entry(*cat)
            .or_insert_with(|| thresholds.iter().map(|&t| ErrorCell::new(t)).collect());
    }

    for (ti, rows) in per_threshold.iter().enumerate() {
        let mut cell = ErrorCell::new(thresholds[ti]);
        for (_, category, flags) in rows {
            cell.add(flags);
            if let Some(cat) = category {
                per_category.get_mut(cat).expect("preallocated")[ti].add(flags);
            }
        }
        cell.finalize();
        overall.push(cell);
    }
    for cells in per_category.values_mut() {
        for cell in cells {
            cell.finalize();
        }
    }

    Ok(ErrorSweep {
        thresholds: thresholds.to_vec(),
        flag_order: FLAG_NAMES.to_vec(),
        overall,
        per_category,
    })
}
