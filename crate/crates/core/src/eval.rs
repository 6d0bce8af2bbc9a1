//! Pair matching and average precision.
//!
//! A prediction matches a ground-truth pair of its HOI class when both the
//! human and the object box exceed the IoU threshold (min-IoU rule); each
//! GT pair is claimed by at most one prediction, in confidence order.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::category::{CategoryAssignment, SceneCategory};
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::model::{check_prediction_images, Dataset, HoiAnnotation, PredictionSet};

/// Matching configuration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvalSettings {
    pub iou_threshold: f64,
    /// Exclude invisible GT pairs from matching (the standard protocol
    /// keeps them).
    pub strict_visible: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { iou_threshold: 0.5, strict_visible: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Tp,
    Fp,
}

/// The resolution of one prediction against the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchOutcome {
    pub prediction_index: usize,
    pub verdict: Verdict,
    /// `(image_id, annotation index)` of the claimed GT pair, TPs only.
    pub matched_gt: Option<(String, usize)>,
    /// min(iou_h, iou_o) against the claimed pair, TPs only.
    pub match_iou: Option<f64>,
}

/// One ground-truth pair of a single HOI class.
#[derive(Debug, Clone)]
pub struct GtPair {
    pub image_id: String,
    pub ann_index: usize,
    pub human_box: BoundingBox,
    pub object_box: BoundingBox,
}

/// One prediction of a single HOI class.
#[derive(Debug, Clone)]
pub struct ScoredPair {
    pub prediction_index: usize,
    pub image_id: String,
    pub human_box: BoundingBox,
    pub object_box: BoundingBox,
    pub score: f64,
}

/// Greedily matches one class's predictions against its GT pairs.
///
/// Predictions are processed by descending score (ties: image_id, then
/// insertion index); each takes the unmatched GT pair in its image that
/// maximizes min(iou_h, iou_o), provided that value exceeds the threshold.
/// Outcomes are returned in processing order.
pub fn match_class(
    gt_pairs: &[GtPair],
    preds: &[ScoredPair],
    iou_threshold: f64,
) -> Vec<MatchOutcome> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .score
            .partial_cmp(&preds[a].score)
            .expect("scores are finite")
            .then_with(|| preds[a].image_id.cmp(&preds[b].image_id))
            .then_with(|| preds[a].prediction_index.cmp(&preds[b].prediction_index))
    });

    let mut gt_by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, g) in gt_pairs.iter().enumerate() {
        gt_by_image.entry(g.image_id.as_str()).or_default().push(idx);
    }

    let mut taken = vec![false; gt_pairs.len()];
    let mut outcomes = Vec::with_capacity(preds.len());
    for &pi in &order {
        let p = &preds[pi];
        let mut best: Option<(usize, f64)> = None;
        if let Some(candidates) = gt_by_image.get(p.image_id.as_str()) {
            for &gi in candidates {
                if taken[gi] {
                    continue;
                }
                let g = &gt_pairs[gi];
                let pair_iou = iou(&p.human_box, &g.human_box).min(iou(&p.object_box, &g.object_box));
                if pair_iou > iou_threshold {
                    let better = match best {
                        None => true,
                        Some((_, cur)) => pair_iou > cur,
                    };
                    if better {
                        best = Some((gi, pair_iou));
                    }
                }
            }
        }
        match best {
            Some((gi, pair_iou)) => {
                taken[gi] = true;
                let g = &gt_pairs[gi];
                outcomes.push(MatchOutcome {
                    prediction_index: p.prediction_index,
                    verdict: Verdict::Tp,
                    matched_gt: Some((g.image_id.clone(), g.ann_index)),
                    match_iou: Some(pair_iou),
                });
            }
            None => outcomes.push(MatchOutcome {
                prediction_index: p.prediction_index,
                verdict: Verdict::Fp,
                matched_gt: None,
                match_iou: None,
            }),
        }
    }
    outcomes
}

/// All-point interpolated average precision over score-sorted outcomes.
///
/// Computed as the sum of envelope precisions at TP ranks divided by
/// `gt_count`, which integrates the precision envelope over recall.
pub fn average_precision(outcomes: &[MatchOutcome], gt_count: usize) -> Result<f64> {
    if gt_count == 0 {
        return Err(Error::contract(
            "average_precision requires gt_count >= 1; zero-GT classes are excluded upstream",
        ));
    }
    let n = outcomes.len();
    let mut precisions = Vec::with_capacity(n);
    let mut tp = 0usize;
    for (rank, o) in outcomes.iter().enumerate() {
        if o.verdict == Verdict::Tp {
            tp += 1;
        }
        precisions.push(tp as f64 / (rank + 1) as f64);
    }
    // precision envelope: max over this and all later ranks
    for i in (0..n.saturating_sub(1)).rev() {
        precisions[i] = precisions[i].max(precisions[i + 1]);
    }
    let mut sum = 0.0;
    for (rank, o) in outcomes.iter().enumerate() {
        if o.verdict == Verdict::Tp {
            sum += precisions[rank];
        }
    }
    Ok(sum / gt_count as f64)
}

/// AP, support, and prediction count for one class in one scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub ap: f64,
    pub gt_count: usize,
    pub prediction_count: usize,
}

/// Evaluation results over the full set and per category.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_name: String,
    pub iou_threshold: f64,
    /// Mean AP over classes with at least one GT pair.
    pub map_overall: f64,
    pub evaluated_classes: usize,
    pub per_class_ap: BTreeMap<u32, ClassAp>,
    pub per_category_map: BTreeMap<SceneCategory, f64>,
    pub per_category_class_ap: BTreeMap<SceneCategory, BTreeMap<u32, ClassAp>>,
    pub single_person_map: Option<f64>,
    pub multi_person_map: Option<f64>,
    /// single minus multi, when both are defined.
    pub single_multi_gap: Option<f64>,
}

/// Ground truth indexed for matching: image lookup plus the annotation
/// subset admitted by the visibility setting.
pub struct GtView<'a> {
    pub dataset: &'a Dataset,
    image_index: BTreeMap<&'a str, usize>,
    kept: Vec<Vec<usize>>,
}

impl<'a> GtView<'a> {
    pub fn build(dataset: &'a Dataset, strict_visible: bool) -> Self {
        let mut image_index = BTreeMap::new();
        let mut kept = Vec::with_capacity(dataset.images.len());
        for (idx, image) in dataset.images.iter().enumerate() {
            image_index.insert(image.image_id.as_str(), idx);
            kept.push(
                image
                    .annotations
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| !strict_visible || !a.invisible)
                    .map(|(i, _)| i)
                    .collect(),
            );
        }
        GtView { dataset, image_index, kept }
    }

    pub fn image_index(&self, image_id: &str) -> Option<usize> {
        self.image_index.get(image_id).copied()
    }

    pub fn kept_annotations(&self, image_idx: usize) -> impl Iterator<Item = (usize, &HoiAnnotation)> {
        self.kept[image_idx]
            .iter()
            .map(move |&i| (i, &self.dataset.images[image_idx].annotations[i]))
    }

    /// Per-class GT pair lists over the kept annotations.
    pub fn class_gt(&self) -> BTreeMap<u32, Vec<GtPair>> {
        let mut out: BTreeMap<u32, Vec<GtPair>> = BTreeMap::new();
        for (image_idx, image) in self.dataset.images.iter().enumerate() {
            for (ann_index, ann) in self.kept_annotations(image_idx) {
                out.entry(ann.hoi_id).or_default().push(GtPair {
                    image_id: image.image_id.clone(),
                    ann_index,
                    human_box: ann.human_box,
                    object_box: ann.object_box,
                });
            }
        }
        out
    }
}

/// Outcomes of matching every class, plus the set of claimed GT pairs.
pub struct DatasetMatch {
    /// Per class, in processing order.
    pub by_class: BTreeMap<u32, Vec<MatchOutcome>>,
}

impl DatasetMatch {
    /// (image_id, annotation index) pairs claimed by some TP.
    pub fn matched_annotations(&self) -> BTreeSet<(String, usize)> {
        self.by_class
            .values()
            .flatten()
            .filter_map(|o| o.matched_gt.clone())
            .collect()
    }

    /// Verdict per prediction index; `None` for predictions below the
    /// score cutoff.
    pub fn verdicts(&self, prediction_count: usize) -> Vec<Option<Verdict>> {
        let mut out = vec![None; prediction_count];
        for o in self.by_class.values().flatten() {
            out[o.prediction_index] = Some(o.verdict);
        }
        out
    }
}

/// Matches every prediction with `score >= min_score` against the ground
/// truth, one class at a time. Classes are independent and processed in
/// parallel; results are keyed, so the merge order is immaterial.
pub fn match_dataset(
    view: &GtView,
    preds: &PredictionSet,
    iou_threshold: f64,
    min_score: f64,
) -> DatasetMatch {
    let class_gt = view.class_gt();

    let mut class_preds: BTreeMap<u32, Vec<ScoredPair>> = BTreeMap::new();
    for (index, p) in preds.predictions.iter().enumerate() {
        if p.score >= min_score {
            class_preds.entry(p.hoi_id).or_default().push(ScoredPair {
                prediction_index: index,
                image_id: p.image_id.clone(),
                human_box: p.human_box,
                object_box: p.object_box,
                score: p.score,
            });
        }
    }

    let classes: BTreeSet<u32> = class_gt.keys().chain(class_preds.keys()).copied().collect();
    let empty_gt: Vec<GtPair> = Vec::new();
    let empty_preds: Vec<ScoredPair> = Vec::new();
    let by_class: BTreeMap<u32, Vec<MatchOutcome>> = classes
        .into_iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&hoi_id| {
            let gt = class_gt.get(&hoi_id).unwrap_or(&empty_gt);
            let pr = class_preds.get(&hoi_id).unwrap_or(&empty_preds);
            (hoi_id, match_class(gt, pr, iou_threshold))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    DatasetMatch { by_class }
}

/// Builds the image -> category lookup from assignments.
pub fn assignment_map(assignments: &[CategoryAssignment]) -> BTreeMap<String, SceneCategory> {
    assignments
        .iter()
        .map(|a| (a.image_id.clone(), a.category))
        .collect()
}

/// Evaluates predictions over the full set and per category.
///
/// Per-category numbers restrict GT and predictions to the category's
/// images; since matching never crosses images, this equals re-matching
/// on the restricted set.
pub fn evaluate(
    gt: &Dataset,
    preds: &PredictionSet,
    categories: &BTreeMap<String, SceneCategory>,
    settings: &EvalSettings,
) -> Result<EvalReport> {
    if !(0.0 < settings.iou_threshold && settings.iou_threshold < 1.0) {
        return Err(Error::contract(format!(
            "iou_threshold must lie in (0, 1), got {}",
            settings.iou_threshold
        )));
    }
    check_prediction_images(preds, gt)?;

    let view = GtView::build(gt, settings.strict_visible);
    let class_gt = view.class_gt();
    let matches = match_dataset(&view, preds, settings.iou_threshold, 0.0);

    // image ids per prediction index, for scoping outcomes
    let pred_images: Vec<&str> = preds.predictions.iter().map(|p| p.image_id.as_str()).collect();

    let ap_for_scope = |scope: Option<&BTreeSet<&str>>| -> BTreeMap<u32, ClassAp> {
        let in_scope = |image_id: &str| scope.is_none_or(|s| s.contains(image_id));
        let mut out = BTreeMap::new();
        for (hoi_id, outcomes) in &matches.by_class {
            let gt_count = class_gt
                .get(hoi_id)
                .map(|v| v.iter().filter(|g| in_scope(&g.image_id)).count())
                .unwrap_or(0);
            if gt_count == 0 {
                continue;
            }
            let scoped: Vec<MatchOutcome> = outcomes
                .iter()
                .filter(|o| in_scope(pred_images[o.prediction_index]))
                .cloned()
                .collect();
            let prediction_count = scoped.len();
            let ap = average_precision(&scoped, gt_count).expect("gt_count >= 1 checked");
            out.insert(*hoi_id, ClassAp { ap, gt_count, prediction_count });
        }
        out
    };

    let mean_ap = |table: &BTreeMap<u32, ClassAp>| -> Option<f64> {
        if table.is_empty() {
            None
        } else {
            Some(table.values().map(|c| c.ap).sum::<f64>() / table.len() as f64)
        }
    };

    let per_class_ap = ap_for_scope(None);
    let map_overall = mean_ap(&per_class_ap).unwrap_or(0.0);

    // category scopes
    let mut images_of: BTreeMap<SceneCategory, BTreeSet<&str>> = BTreeMap::new();
    for image in &gt.images {
        if let Some(cat) = categories.get(&image.image_id) {
            images_of.entry(*cat).or_default().insert(image.image_id.as_str());
        }
    }
    let mut single_scope: BTreeSet<&str> = BTreeSet::new();
    let mut multi_scope: BTreeSet<&str> = BTreeSet::new();
    for (cat, imgs) in &images_of {
        if cat.is_single_person() {
            single_scope.extend(imgs.iter().copied());
        }
        if cat.is_multi_person() {
            multi_scope.extend(imgs.iter().copied());
        }
    }

    let mut per_category_map = BTreeMap::new();
    let mut per_category_class_ap = BTreeMap::new();
    for (cat, imgs) in &images_of {
        let table = ap_for_scope(Some(imgs));
        if let Some(m) = mean_ap(&table) {
            per_category_map.insert(*cat, m);
        }
        per_category_class_ap.insert(*cat, table);
    }

    let single_person_map = mean_ap(&ap_for_scope(Some(&single_scope)));
    let multi_person_map = mean_ap(&ap_for_scope(Some(&multi_scope)));
    let single_multi_gap = match (single_person_map, multi_person_map) {
        (Some(s), Some(m)) => Some(s - m),
        _ => None,
    };

    Ok(EvalReport {
        model_name: preds.model_name.clone(),
        iou_threshold: settings.iou_threshold,
        map_overall,
        evaluated_classes: per_class_ap.len(),
        per_class_ap,
        per_category_map,
        per_category_class_ap,
        single_person_map,
        multi_person_map,
        single_multi_gap,
    })
}
