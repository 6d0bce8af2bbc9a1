//! Canonical annotation schema: ground-truth files and prediction files.
//!
//! Ground-truth JSON embeds the vocabulary:
//! `{"vocabulary": {...}, "images": [{"image_id", "width", "height",
//! "annotations": [{"human_box", "object_box", "hoi_id", "invisible"}]}]}`.
//!
//! Prediction JSON: `{"model_name", "predictions": [{"image_id",
//! "human_box", "object_box", "hoi_id", "score"}]}`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::vocab::Vocabulary;

/// One annotated human-object pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoiAnnotation {
    pub human_box: BoundingBox,
    pub object_box: BoundingBox,
    pub hoi_id: u32,
    #[serde(default)]
    pub invisible: bool,
}

/// One test or train image with its ordered annotation list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthImage {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
    pub annotations: Vec<HoiAnnotation>,
}

/// A parsed ground-truth file: label space plus images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub vocabulary: Vocabulary,
    pub images: Vec<GroundTruthImage>,
}

/// One scored triplet produced by a detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image_id: String,
    pub human_box: BoundingBox,
    pub object_box: BoundingBox,
    pub hoi_id: u32,
    pub score: f64,
}

/// A parsed prediction file. Vec order is file order; the position of a
/// prediction doubles as its insertion index for tie-breaking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model_name: String,
    pub predictions: Vec<Prediction>,
}

impl Dataset {
    /// Parses a canonical ground-truth file, validating and clamping every
    /// box against its image bounds.
    pub fn from_path(path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::json(path, source),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Dataset> {
        let raw: Dataset =
            serde_json::from_str(text).map_err(|e| Error::json("<inline>", e))?;
        raw.validated()
    }

    /// Applies the ingest rules: unique image ids, known hoi ids, valid
    /// boxes clamped to image bounds.
    pub fn validated(mut self) -> Result<Dataset> {
        let mut seen = BTreeSet::new();
        for image in &mut self.images {
            if !seen.insert(image.image_id.clone()) {
                return Err(Error::schema(format!("duplicate image_id {}", image.image_id)));
            }
            if !(image.width > 0.0 && image.height > 0.0)
                || !image.width.is_finite()
                || !image.height.is_finite()
            {
                return Err(Error::schema(format!(
                    "image {} has invalid dimensions {}x{}",
                    image.image_id, image.width, image.height
                )));
            }
            for (idx, ann) in image.annotations.iter_mut().enumerate() {
                if !self.vocabulary.contains_hoi(ann.hoi_id) {
                    return Err(Error::schema(format!(
                        "image {}: annotation {} references unknown hoi_id {}",
                        image.image_id, idx, ann.hoi_id
                    )));
                }
                for (side, b) in [("human", &mut ann.human_box), ("object", &mut ann.object_box)] {
                    b.validate().map_err(|e| {
                        Error::schema(format!(
                            "image {}: annotation {} {side} box: {e}",
                            image.image_id, idx
                        ))
                    })?;
                    *b = b.clamp_to(image.width, image.height).map_err(|e| {
                        Error::schema(format!(
                            "image {}: annotation {} {side} box: {e}",
                            image.image_id, idx
                        ))
                    })?;
                }
            }
        }
        Ok(self)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serialization cannot fail")
    }

    pub fn image(&self, image_id: &str) -> Option<&GroundTruthImage> {
        self.images.iter().find(|i| i.image_id == image_id)
    }
}

/// Parses a canonical ground-truth file and checks that its embedded
/// vocabulary matches `vocab` exactly.
pub fn parse_ground_truth(path: &Path, vocab: &Vocabulary) -> Result<Vec<GroundTruthImage>> {
    let ds = Dataset::from_path(path)?;
    if &ds.vocabulary != vocab {
        return Err(Error::schema(format!(
            "vocabulary in {} differs from the expected vocabulary",
            path.display()
        )));
    }
    Ok(ds.images)
}

impl PredictionSet {
    pub fn from_path(path: &Path, vocab: &Vocabulary) -> Result<PredictionSet> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: PredictionSet =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        raw.validated(vocab)
    }

    pub fn validated(self, vocab: &Vocabulary) -> Result<PredictionSet> {
        for (idx, p) in self.predictions.iter().enumerate() {
            if !vocab.contains_hoi(p.hoi_id) {
                return Err(Error::schema(format!(
                    "prediction {idx} (image {}) references unknown hoi_id {}",
                    p.image_id, p.hoi_id
                )));
            }
            if !(0.0..=1.0).contains(&p.score) || !p.score.is_finite() {
                return Err(Error::schema(format!(
                    "prediction {idx} (image {}) has score {} outside [0, 1]",
                    p.image_id, p.score
                )));
            }
            for (side, b) in [("human", &p.human_box), ("object", &p.object_box)] {
                b.validate().map_err(|e| {
                    Error::schema(format!("prediction {idx} (image {}) {side} box: {e}", p.image_id))
                })?;
            }
        }
        Ok(self)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("prediction serialization cannot fail")
    }
}

/// Parses a canonical prediction file against a vocabulary.
pub fn parse_predictions(path: &Path, vocab: &Vocabulary) -> Result<PredictionSet> {
    PredictionSet::from_path(path, vocab)
}

/// Every prediction must reference an image present in the ground truth;
/// per-category evaluation depends on it.
pub fn check_prediction_images(preds: &PredictionSet, gt: &Dataset) -> Result<()> {
    let known: BTreeSet<&str> = gt.images.iter().map(|i| i.image_id.as_str()).collect();
    for (idx, p) in preds.predictions.iter().enumerate() {
        if !known.contains(p.image_id.as_str()) {
            return Err(Error::schema(format!(
                "prediction {idx} references image {} absent from the ground truth",
                p.image_id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{HoiClass, ObjectCategory, Verb};

    pub(crate) fn tiny_vocab() -> Vocabulary {
        Vocabulary::new(
            vec![
                ObjectCategory { object_id: 1, name: "horse".into() },
                ObjectCategory { object_id: 2, name: "cup".into() },
            ],
            vec![
                Verb { verb_id: 1, name: "no_interaction".into(), is_no_interaction: true },
                Verb { verb_id: 2, name: "ride".into(), is_no_interaction: false },
                Verb { verb_id: 3, name: "hold".into(), is_no_interaction: false },
            ],
            vec![
                HoiClass { hoi_id: 1, verb_id: 1, object_id: 1 },
                HoiClass { hoi_id: 2, verb_id: 2, object_id: 1 },
                HoiClass { hoi_id: 3, verb_id: 3, object_id: 1 },
                HoiClass { hoi_id: 4, verb_id: 1, object_id: 2 },
                HoiClass { hoi_id: 5, verb_id: 3, object_id: 2 },
            ],
        )
        .unwrap()
    }

    fn gt_json(annotations: &str) -> String {
        let vocab = serde_json::to_string(&tiny_vocab()).unwrap();
        format!(
            r#"{{"vocabulary": {vocab},
                "images": [{{"image_id": "img1", "width": 100, "height": 100,
                             "annotations": [{annotations}]}}]}}"#
        )
    }

    #[test]
    fn parses_single_image_single_annotation() {
        let text = gt_json(
            r#"{"human_box": [0,0,10,10], "object_box": [20,20,30,30], "hoi_id": 2, "invisible": false}"#,
        );
        let ds = Dataset::from_json(&text).unwrap();
        assert_eq!(ds.images.len(), 1);
        assert_eq!(ds.images[0].annotations.len(), 1);
        assert_eq!(ds.images[0].annotations[0].hoi_id, 2);
    }

    #[test]
    fn malformed_json_reports_line_and_column() {
        let err = Dataset::from_json("{\n  \"vocabulary\": {,}\n}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("column"), "{err}");
    }

    #[test]
    fn rejects_degenerate_box_naming_image_and_index() {
        let text = gt_json(
            r#"{"human_box": [5,0,5,10], "object_box": [20,20,30,30], "hoi_id": 2, "invisible": false}"#,
        );
        let err = Dataset::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("img1"), "{err}");
        assert!(err.contains("annotation 0"), "{err}");
    }

    #[test]
    fn rejects_unknown_hoi_naming_image() {
        let text = gt_json(
            r#"{"human_box": [0,0,10,10], "object_box": [20,20,30,30], "hoi_id": 99, "invisible": false}"#,
        );
        let err = Dataset::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("img1") && err.contains("99"), "{err}");
    }

    #[test]
    fn clamps_overshooting_boxes() {
        let text = gt_json(
            r#"{"human_box": [0,0,10,10], "object_box": [90,90,130,140], "hoi_id": 2, "invisible": false}"#,
        );
        let ds = Dataset::from_json(&text).unwrap();
        let b = &ds.images[0].annotations[0].object_box;
        assert_eq!((b.x2, b.y2), (100.0, 100.0));
    }

    #[test]
    fn clamp_that_empties_a_box_is_a_schema_error() {
        let text = gt_json(
            r#"{"human_box": [0,0,10,10], "object_box": [150,150,200,200], "hoi_id": 2, "invisible": false}"#,
        );
        assert!(Dataset::from_json(&text).is_err());
    }

    #[test]
    fn rejects_duplicate_image_ids() {
        let vocab = serde_json::to_string(&tiny_vocab()).unwrap();
        let text = format!(
            r#"{{"vocabulary": {vocab},
                "images": [
                  {{"image_id": "a", "width": 10, "height": 10, "annotations": []}},
                  {{"image_id": "a", "width": 10, "height": 10, "annotations": []}}]}}"#
        );
        assert!(Dataset::from_json(&text).is_err());
    }

    #[test]
    fn serialize_parse_round_trip_is_identity() {
        let text = gt_json(
            r#"{"human_box": [0,0,10,10], "object_box": [20,20,30,30], "hoi_id": 2, "invisible": true}"#,
        );
        let ds = Dataset::from_json(&text).unwrap();
        let again = Dataset::from_json(&ds.to_json_pretty()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn prediction_score_out_of_range_is_rejected() {
        let vocab = tiny_vocab();
        let set = PredictionSet {
            model_name: "m".into(),
            predictions: vec![Prediction {
                image_id: "img1".into(),
                human_box: BoundingBox::new(0.0, 0.0, 10.0, 10.0),
                object_box: BoundingBox::new(20.0, 20.0, 30.0, 30.0),
                hoi_id: 2,
                score: 1.5,
            }],
        };
        assert!(set.validated(&vocab).is_err());
    }

    #[test]
    fn empty_prediction_list_parses() {
        let set = PredictionSet { model_name: "m".into(), predictions: vec![] };
        assert_eq!(set.validated(&tiny_vocab()).unwrap().predictions.len(), 0);
    }

    #[test]
    fn prediction_round_trip_identity() {
        let set = PredictionSet {
            model_name: "m".into(),
            predictions: vec![Prediction {
                image_id: "img1".into(),
                human_box: BoundingBox::new(0.0, 0.0, 10.0, 10.0),
                object_box: BoundingBox::new(20.0, 20.0, 30.0, 30.0),
                hoi_id: 2,
                score: 0.625,
            }],
        };
        let text = set.to_json_pretty();
        let back: PredictionSet = serde_json::from_str(&text).unwrap();
        assert_eq!(set, back.validated(&tiny_vocab()).unwrap());
    }

    #[test]
    fn unknown_prediction_image_is_a_hard_error() {
        let vocab = tiny_vocab();
        let gt = Dataset::from_json(&gt_json(
            r#"{"human_box": [0,0,10,10], "object_box": [20,20,30,30], "hoi_id": 2, "invisible": false}"#,
        ))
        .unwrap();
        let preds = PredictionSet {
            model_name: "m".into(),
            predictions: vec![Prediction {
                image_id: "ghost".into(),
                human_box: BoundingBox::new(0.0, 0.0, 10.0, 10.0),
                object_box: BoundingBox::new(20.0, 20.0, 30.0, 30.0),
                hoi_id: 2,
                score: 0.5,
            }],
        };
        let preds = preds.validated(&vocab).unwrap();
        assert!(check_prediction_images(&preds, &gt).is_err());
    }
}
