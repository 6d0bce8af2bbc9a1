//! Property tests over the geometric and matching invariants. Strategies
//! are seed-driven: proptest explores seeds and the builders expand them
//! deterministically.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use hoidiag::category::{categorize_image, CategorizeOptions, SceneCategory};
use hoidiag::eval::{match_dataset, EvalSettings, GtView, Verdict};
use hoidiag::model::Dataset;
use hoidiag::synth::{
    generate, synth_vocabulary, GeometryBounds, InjectionPlan, SplitMix64, SynthCategory,
    SynthSpec,
};
use hoidiag::{iou, BoundingBox};

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (0.0..500.0f64, 0.0..500.0f64, 1.0..400.0f64, 1.0..400.0f64)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h))
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let ab = iou(&a, &b);
        prop_assert_eq!(ab, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn iou_is_translation_and_scale_invariant(
        a in arb_box(),
        b in arb_box(),
        dx in 0.0..200.0f64,
        dy in 0.0..200.0f64,
        s in 0.1..8.0f64,
    ) {
        let shift = |c: &BoundingBox| BoundingBox::new(c.x1 + dx, c.y1 + dy, c.x2 + dx, c.y2 + dy);
        let scale = |c: &BoundingBox| BoundingBox::new(c.x1 * s, c.y1 * s, c.x2 * s, c.y2 * s);
        let base = iou(&a, &b);
        prop_assert!((iou(&shift(&a), &shift(&b)) - base).abs() <= 1e-12);
        prop_assert!((iou(&scale(&a), &scale(&b)) - base).abs() <= 1e-12);
    }

    #[test]
    fn identical_boxes_have_iou_exactly_one(a in arb_box()) {
        prop_assert_eq!(iou(&a, &a), 1.0);
    }
}

fn generated_scene(seed: u64, category: SynthCategory) -> Dataset {
    let spec = SynthSpec {
        seed,
        category_mix: vec![(category, 1)],
        person_range: (2, 4),
        injections: InjectionPlan::none(),
        bounds: GeometryBounds::default(),
    };
    generate(&spec).expect("valid spec").0
}

fn arb_category() -> impl Strategy<Value = SynthCategory> {
    prop::sample::select(SynthCategory::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Permuting the annotation list changes neither the category nor the
    /// instance partition.
    #[test]
    fn categorization_is_annotation_order_invariant(
        seed in 0u64..10_000,
        category in arb_category(),
        perm_seed in 0u64..10_000,
    ) {
        let ds = generated_scene(seed, category);
        let image = &ds.images[0];
        let base = categorize_image(image, &ds.vocabulary, &CategorizeOptions::default()).unwrap();

        let mut shuffled = image.clone();
        let mut rng = SplitMix64::new(perm_seed);
        rng.shuffle(&mut shuffled.annotations);
        let permuted =
            categorize_image(&shuffled, &ds.vocabulary, &CategorizeOptions::default()).unwrap();

        prop_assert_eq!(base.category, permuted.category);
        prop_assert_eq!(base.exclusion_reason, permuted.exclusion_reason);
        prop_assert_eq!(base.person_count, permuted.person_count);
        prop_assert_eq!(base.object_instance_count, permuted.object_instance_count);
        prop_assert_eq!(base.hoi_count, permuted.hoi_count);
    }

    /// Every image lands in exactly one category, with a reason iff
    /// excluded, and the person count agrees with the category family.
    #[test]
    fn categorization_partitions_cleanly(
        seed in 0u64..10_000,
        category in arb_category(),
    ) {
        let ds = generated_scene(seed, category);
        let a = categorize_image(&ds.images[0], &ds.vocabulary, &CategorizeOptions::default())
            .unwrap();
        prop_assert_eq!(a.exclusion_reason.is_some(), a.category == SceneCategory::Excluded);
        if a.person_count == 1 {
            prop_assert!(matches!(
                a.category,
                SceneCategory::Spso | SceneCategory::Spmo | SceneCategory::Excluded
            ));
        }
        if a.person_count >= 2 {
            prop_assert!(a.category.is_multi_person() || a.category == SceneCategory::Excluded);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// One-to-one matching: no GT annotation is claimed twice within a
    /// class, and raising the IoU threshold never adds true positives.
    #[test]
    fn matching_is_one_to_one_and_threshold_monotone(seed in 0u64..50_000) {
        let vocab = synth_vocabulary();
        let mut rng = SplitMix64::new(seed);
        let (gt, preds) = common::random_instance(&mut rng, &vocab, 4, 3, 4);
        let view = GtView::build(&gt, false);

        let mut prev_tp = usize::MAX;
        for threshold in [0.3, 0.5, 0.7] {
            let matches = match_dataset(&view, &preds, threshold, 0.0);
            let mut tp = 0usize;
            for (class, outcomes) in &matches.by_class {
                let mut claimed: BTreeSet<(String, usize)> = BTreeSet::new();
                for o in outcomes {
                    if let Some(gt_ref) = &o.matched_gt {
                        tp += 1;
                        prop_assert!(
                            claimed.insert(gt_ref.clone()),
                            "class {} claimed {:?} twice", class, gt_ref
                        );
                    }
                }
            }
            prop_assert!(tp <= prev_tp, "tp count rose from {} to {}", prev_tp, tp);
            prev_tp = tp;
        }
    }

    /// Serialize -> parse is the identity on canonical files.
    #[test]
    fn canonical_serialization_round_trips(seed in 0u64..50_000) {
        let vocab = synth_vocabulary();
        let mut rng = SplitMix64::new(seed);
        let (gt, preds) = common::random_instance(&mut rng, &vocab, 3, 2, 2);
        let gt_again = Dataset::from_json(&gt.to_json_pretty()).unwrap();
        prop_assert_eq!(&gt, &gt_again);
        let preds_again: hoidiag::PredictionSet =
            serde_json::from_str(&preds.to_json_pretty()).unwrap();
        prop_assert_eq!(&preds, &preds_again.validated(&vocab).unwrap());
    }

    /// The evaluator's verdicts agree with the naive oracle's TP/FP
    /// resolution, not just its AP numbers.
    #[test]
    fn verdicts_agree_with_naive_map(seed in 0u64..50_000) {
        let vocab = synth_vocabulary();
        let mut rng = SplitMix64::new(seed);
        let (gt, preds) = common::random_instance(&mut rng, &vocab, 3, 2, 3);
        let report = hoidiag::evaluate(
            &gt,
            &preds,
            &std::collections::BTreeMap::new(),
            &EvalSettings::default(),
        )
        .unwrap();
        let reference = common::naive::mean_ap(&gt, &preds, 0.5, false);
        prop_assert!((report.map_overall - reference).abs() <= 1e-9);
    }

    /// Sum of pair-verb set sizes equals the number of annotations kept
    /// under the categorization flags.
    #[test]
    fn pair_verbs_account_for_every_kept_annotation(
        seed in 0u64..10_000,
        category in arb_category(),
    ) {
        let ds = generated_scene(seed, category);
        let image = &ds.images[0];
        let g = hoidiag::resolve_instances(
            image,
            &ds.vocabulary,
            &hoidiag::ResolveOptions::for_categorization(0.7),
        )
        .unwrap();
        let kept = image
            .annotations
            .iter()
            .filter(|a| !a.invisible && !ds.vocabulary.is_no_interaction_hoi(a.hoi_id))
            .count();
        let total: usize = g.pair_verbs.values().map(BTreeSet::len).sum();
        prop_assert_eq!(total, kept);
    }

    /// Per-category mAP equals literally re-evaluating on the restricted
    /// image set (matching never crosses images, so the scoped outcomes
    /// are the restricted set's own matching).
    #[test]
    fn per_category_map_equals_restricted_evaluation(seed in 0u64..50_000) {
        let vocab = synth_vocabulary();
        let mut rng = SplitMix64::new(seed);
        let (gt, preds) = common::random_instance(&mut rng, &vocab, 6, 2, 3);

        // split the images across two arbitrary category labels
        let categories: std::collections::BTreeMap<String, SceneCategory> = gt
            .images
            .iter()
            .enumerate()
            .map(|(i, image)| {
                let cat = if i % 2 == 0 { SceneCategory::Spso } else { SceneCategory::C };
                (image.image_id.clone(), cat)
            })
            .collect();

        let full = hoidiag::evaluate(&gt, &preds, &categories, &EvalSettings::default()).unwrap();

        for target in [SceneCategory::Spso, SceneCategory::C] {
            let scope: std::collections::BTreeSet<&String> = categories
                .iter()
                .filter(|(_, c)| **c == target)
                .map(|(id, _)| id)
                .collect();
            let restricted_gt = Dataset {
                vocabulary: vocab.clone(),
                images: gt
                    .images
                    .iter()
                    .filter(|i| scope.contains(&i.image_id))
                    .cloned()
                    .collect(),
            };
            let restricted_preds = hoidiag::PredictionSet {
                model_name: preds.model_name.clone(),
                predictions: preds
                    .predictions
                    .iter()
                    .filter(|p| scope.contains(&p.image_id))
                    .cloned()
                    .collect(),
            };
            let restricted = hoidiag::evaluate(
                &restricted_gt,
                &restricted_preds,
                &std::collections::BTreeMap::new(),
                &EvalSettings::default(),
            )
            .unwrap();

            match full.per_category_map.get(&target) {
                Some(scoped_map) => {
                    prop_assert!(
                        (scoped_map - restricted.map_overall).abs() <= 1e-12,
                        "{target}: scoped {scoped_map} vs restricted {}",
                        restricted.map_overall
                    );
                    let scoped_classes = &full.per_category_class_ap[&target];
                    prop_assert_eq!(scoped_classes.len(), restricted.per_class_ap.len());
                    for (hoi_id, class) in scoped_classes {
                        let r = &restricted.per_class_ap[hoi_id];
                        prop_assert!((class.ap - r.ap).abs() <= 1e-12);
                        prop_assert_eq!(class.gt_count, r.gt_count);
                        prop_assert_eq!(class.prediction_count, r.prediction_count);
                    }
                }
                None => prop_assert_eq!(restricted.evaluated_classes, 0),
            }
        }
    }

    /// Matching a prediction set against itself as GT echoes every
    /// prediction as a TP (scores aside, boxes are identical).
    #[test]
    fn echoed_ground_truth_matches_completely(seed in 0u64..50_000) {
        let spec = SynthSpec {
            seed,
            category_mix: vec![(SynthCategory::Spmo, 1), (SynthCategory::D, 1)],
            person_range: (2, 3),
            injections: InjectionPlan::tp_only(),
            bounds: GeometryBounds::default(),
        };
        let (gt, preds, _) = generate(&spec).unwrap();
        let view = GtView::build(&gt, false);
        let matches = match_dataset(&view, &preds, 0.5, 0.0);
        let verdicts = matches.verdicts(preds.predictions.len());
        prop_assert!(verdicts.iter().all(|v| *v == Some(Verdict::Tp)));
    }
}
