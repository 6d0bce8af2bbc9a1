//! Shared test helpers: an independent naive evaluator, a community-format
//! exporter, and randomized instance builders.
//!
//! The naive evaluator is deliberately written from the contract, not from
//! the library source: straight O(n^2) scans and a textbook all-point AP
//! integration. It exists to cross-check the production path.
//!
//! Not every test target uses every helper.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hoidiag::model::{Dataset, GroundTruthImage, HoiAnnotation, Prediction, PredictionSet};
use hoidiag::synth::SplitMix64;
use hoidiag::vocab::Vocabulary;
use hoidiag::BoundingBox;

pub mod naive {
    use super::*;

    fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
        let w = f64::min(a.x2, b.x2) - f64::max(a.x1, b.x1);
        let h = f64::min(a.y2, b.y2) - f64::max(a.y1, b.y1);
        if w <= 0.0 || h <= 0.0 {
            return 0.0;
        }
        let inter = w * h;
        let area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
        let area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
        inter / (area_a + area_b - inter)
    }

    /// AP of one HOI class, or `None` when the class has no ground truth.
    pub fn class_ap(
        gt: &Dataset,
        preds: &PredictionSet,
        hoi_id: u32,
        iou_threshold: f64,
        strict_visible: bool,
    ) -> Option<f64> {
        // ground truth of this class: (image, annotation index, boxes)
        let mut gt_pairs: Vec<(&str, usize, &HoiAnnotation)> = Vec::new();
        for image in &gt.images {
            for (idx, ann) in image.annotations.iter().enumerate() {
                if ann.hoi_id == hoi_id && (!strict_visible || !ann.invisible) {
                    gt_pairs.push((image.image_id.as_str(), idx, ann));
                }
            }
        }
        if gt_pairs.is_empty() {
            return None;
        }

        let mut ranked: Vec<(usize, &Prediction)> = preds
            .predictions
            .iter()
            .enumerate()
            .filter(|(_, p)| p.hoi_id == hoi_id)
            .collect();
        ranked.sort_by(|(ia, a), (ib, b)| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then_with(|| a.image_id.cmp(&b.image_id))
                .then_with(|| ia.cmp(ib))
        });

        let mut claimed = vec![false; gt_pairs.len()];
        let mut tp_flags = Vec::with_capacity(ranked.len());
        for (_, p) in &ranked {
            let mut best: Option<(usize, f64)> = None;
            for (gi, (image_id, _, ann)) in gt_pairs.iter().enumerate() {
                if claimed[gi] || *image_id != p.image_id {
                    continue;
                }
                let m = f64::min(iou(&p.human_box, &ann.human_box), iou(&p.object_box, &ann.object_box));
                if m > iou_threshold {
                    let take = match best {
                        None => true,
                        Some((_, cur)) => m > cur,
                    };
                    if take {
                        best = Some((gi, m));
                    }
                }
            }
            match best {
                Some((gi, _)) => {
                    claimed[gi] = true;
                    tp_flags.push(true);
                }
                None => tp_flags.push(false),
            }
        }

        // textbook all-point AP: integrate the precision envelope over the
        // recall steps, recomputing the envelope by forward scan each time
        let n = tp_flags.len();
        let mut precisions = Vec::with_capacity(n);
        let mut recalls = Vec::with_capacity(n);
        let mut tp = 0usize;
        for (rank, &is_tp) in tp_flags.iter().enumerate() {
            if is_tp {
                tp += 1;
            }
            precisions.push(tp as f64 / (rank + 1) as f64);
            recalls.push(tp as f64 / gt_pairs.len() as f64);
        }
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for rank in 0..n {
            if !tp_flags[rank] {
                continue;
            }
            let mut envelope: f64 = 0.0;
            for p in &precisions[rank..] {
                envelope = envelope.max(*p);
            }
            ap += (recalls[rank] - prev_recall) * envelope;
            prev_recall = recalls[rank];
        }
        Some(ap)
    }

    /// Naive mAP: mean of class APs over classes with ground truth.
    pub fn mean_ap(
        gt: &Dataset,
        preds: &PredictionSet,
        iou_threshold: f64,
        strict_visible: bool,
    ) -> f64 {
        let mut aps = Vec::new();
        for class in gt.vocabulary.hoi_classes() {
            if let Some(ap) = class_ap(gt, preds, class.hoi_id, iou_threshold, strict_visible) {
                aps.push(ap);
            }
        }
        if aps.is_empty() {
            0.0
        } else {
            aps.iter().sum::<f64>() / aps.len() as f64
        }
    }
}

/// Serializes a canonical dataset into the community annotation-list
/// layout, deduplicating boxes the way real exports do.
pub fn to_community_json(ds: &Dataset) -> String {
    use serde_json::json;

    let entries: Vec<serde_json::Value> = ds
        .images
        .iter()
        .map(|image| {
            let mut boxes: Vec<serde_json::Value> = Vec::new();
            let mut index_of: BTreeMap<(u32, [u64; 4]), usize> = BTreeMap::new();
            let mut intern = |category: u32, b: &BoundingBox| -> usize {
                let key = (category, [b.x1.to_bits(), b.y1.to_bits(), b.x2.to_bits(), b.y2.to_bits()]);
                *index_of.entry(key).or_insert_with(|| {
                    boxes.push(json!({"bbox": [b.x1, b.y1, b.x2, b.y2], "category_id": category}));
                    boxes.len() - 1
                })
            };

            let connections: Vec<serde_json::Value> = image
                .annotations
                .iter()
                .map(|ann| {
                    let subject = intern(1, &ann.human_box);
                    let object_cat = ds.vocabulary.object_of(ann.hoi_id);
                    let object = intern(object_cat, &ann.object_box);
                    json!({
                        "subject_id": subject,
                        "object_id": object,
                        "category_id": ds.vocabulary.verb_of(ann.hoi_id),
                        "hoi_category_id": ann.hoi_id,
                        "invisible": if ann.invisible { 1 } else { 0 },
                    })
                })
                .collect();

            json!({
                "file_name": image.image_id,
                "width": image.width,
                "height": image.height,
                "annotations": boxes,
                "hoi_annotation": connections,
            })
        })
        .collect();

    serde_json::to_string(&entries).unwrap()
}

/// A random small evaluation instance: boxes anywhere (overlaps included),
/// random classes, scores, and visibility.
pub fn random_instance(
    rng: &mut SplitMix64,
    vocab: &Vocabulary,
    max_images: usize,
    max_gt_per_class: usize,
    max_preds_per_class: usize,
) -> (Dataset, PredictionSet) {
    let class_ids: Vec<u32> = vocab.hoi_classes().iter().map(|h| h.hoi_id).collect();
    let n_images = rng.range(1, max_images);
    let n_classes = rng.range(1, 3.min(class_ids.len()));
    let mut chosen = class_ids.clone();
    rng.shuffle(&mut chosen);
    chosen.truncate(n_classes);

    let random_box = |rng: &mut SplitMix64| {
        let x1 = rng.uniform(0.0, 800.0);
        let y1 = rng.uniform(0.0, 800.0);
        let w = rng.uniform(20.0, 190.0);
        let h = rng.uniform(20.0, 190.0);
        BoundingBox::new(x1, y1, x1 + w, y1 + h)
    };

    let mut images = Vec::new();
    let mut predictions = Vec::new();
    for i in 0..n_images {
        let image_id = format!("rand_{i:03}");
        let mut annotations = Vec::new();
        for &hoi_id in &chosen {
            for _ in 0..rng.range(0, max_gt_per_class) {
                annotations.push(HoiAnnotation {
                    human_box: random_box(rng),
                    object_box: random_box(rng),
                    hoi_id,
                    invisible: rng.next_f64() < 0.15,
                });
            }
            for _ in 0..rng.range(0, max_preds_per_class) {
                // half the predictions hug an annotation, half are blind
                let (human_box, object_box) = if !annotations.is_empty() && rng.next_f64() < 0.5 {
                    let ann = &annotations[rng.range(0, annotations.len() - 1)];
                    let nudge = |b: &BoundingBox, rng: &mut SplitMix64| {
                        let dx = rng.uniform(-30.0, 30.0);
                        let dy = rng.uniform(-30.0, 30.0);
                        BoundingBox::new(
                            (b.x1 + dx).max(0.0),
                            (b.y1 + dy).max(0.0),
                            (b.x2 + dx).max(1.0),
                            (b.y2 + dy).max(1.0),
                        )
                    };
                    (nudge(&ann.human_box, rng), nudge(&ann.object_box, rng))
                } else {
                    (random_box(rng), random_box(rng))
                };
                predictions.push(Prediction {
                    image_id: image_id.clone(),
                    human_box,
                    object_box,
                    hoi_id,
                    score: rng.next_f64(),
                });
            }
        }
        images.push(GroundTruthImage { image_id, width: 1000.0, height: 1000.0, annotations });
    }

    let dataset = Dataset { vocabulary: vocab.clone(), images }
        .validated()
        .expect("random boxes satisfy the schema");
    let preds = PredictionSet { model_name: "random".into(), predictions }
        .validated(vocab)
        .expect("random predictions satisfy the schema");
    (dataset, preds)
}
