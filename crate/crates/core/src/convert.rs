//! Adapter for community HICO-DET JSON exports.
//!
//! The `hico-community-v1` layout is a JSON array with one object per image:
//! a `file_name`, a flat `annotations` box list, and `hoi_annotation`
//! entries connecting a subject box index to an object box index. `width`
//! and `height` are optional (inferred from box extents when absent), and
//! each connection may carry an `invisible` flag (bool or 0/1).

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::model::{Dataset, GroundTruthImage, HoiAnnotation};
use crate::vocab::Vocabulary;

/// Supported external layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalFormat {
    HicoCommunityV1,
}

impl ExternalFormat {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "hico-community-v1" => Ok(ExternalFormat::HicoCommunityV1),
            other => Err(Error::schema(format!("unsupported external format tag '{other}'"))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ExternalFormat::HicoCommunityV1 => "hico-community-v1",
        }
    }
}

#[derive(Debug, Deserialize)]
struct CommunityEntry {
    file_name: String,
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    height: Option<f64>,
    annotations: Vec<CommunityBox>,
    hoi_annotation: Vec<CommunityHoi>,
}

#[derive(Debug, Deserialize)]
struct CommunityBox {
    bbox: [f64; 4],
    category_id: u32,
}

#[derive(Debug, Deserialize)]
struct CommunityHoi {
    subject_id: usize,
    object_id: usize,
    /// Verb id; optional, cross-checked against the hoi class when present.
    #[serde(default)]
    category_id: Option<u32>,
    hoi_category_id: u32,
    #[serde(default, deserialize_with = "deserialize_flag")]
    invisible: bool,
}

fn deserialize_flag<'de, D>(deserializer: D) -> std::result::Result<bool, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(i64),
    }
    Ok(match Flag::deserialize(deserializer)? {
        Flag::Bool(b) => b,
        Flag::Int(n) => n != 0,
    })
}

/// Converts an external annotation export into canonical images.
///
/// Corner order is normalized here (the canonical parser is strict);
/// conversion is otherwise lossless for boxes, hoi ids, and visibility.
pub fn convert_external(
    path: &Path,
    format: ExternalFormat,
    vocab: &Vocabulary,
) -> Result<Vec<GroundTruthImage>> {
    match format {
        ExternalFormat::HicoCommunityV1 => convert_hico_community(path, vocab),
    }
}

/// Convenience wrapper returning a full canonical dataset.
pub fn convert_external_dataset(
    path: &Path,
    format: ExternalFormat,
    vocab: &Vocabulary,
) -> Result<Dataset> {
    let images = convert_external(path, format, vocab)?;
    Dataset { vocabulary: vocab.clone(), images }.validated()
}

fn convert_hico_community(path: &Path, vocab: &Vocabulary) -> Result<Vec<GroundTruthImage>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<CommunityEntry> =
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;

    let mut images = Vec::with_capacity(entries.len());
    for entry in entries {
        let boxes: Vec<BoundingBox> = entry
            .annotations
            .iter()
            .map(|b| BoundingBox::from(b.bbox).normalized_corners())
            .collect();

        let mut annotations = Vec::with_capacity(entry.hoi_annotation.len());
        for (idx, conn) in entry.hoi_annotation.iter().enumerate() {
            let human_box = *boxes.get(conn.subject_id).ok_or_else(|| {
                Error::schema(format!(
                    "{}: hoi connection {idx} subject index {} out of range",
                    entry.file_name, conn.subject_id
                ))
            })?;
            let object_box = *boxes.get(conn.object_id).ok_or_else(|| {
                Error::schema(format!(
                    "{}: hoi connection {idx} object index {} out of range",
                    entry.file_name, conn.object_id
                ))
            })?;
            let class = vocab.hoi(conn.hoi_category_id).map_err(|_| {
                Error::schema(format!(
                    "{}: hoi connection {idx} references unknown hoi_id {}",
                    entry.file_name, conn.hoi_category_id
                ))
            })?;
            if let Some(verb) = conn.category_id {
                if verb != class.verb_id {
                    return Err(Error::schema(format!(
                        "{}: hoi connection {idx} verb {} disagrees with hoi class {} (verb {})",
                        entry.file_name, verb, class.hoi_id, class.verb_id
                    )));
                }
            }
            let obj_class = entry.annotations[conn.object_id].category_id;
            if obj_class != class.object_id {
                return Err(Error::schema(format!(
                    "{}: hoi connection {idx} object box category {} disagrees with hoi class {} (object {})",
                    entry.file_name, obj_class, class.hoi_id, class.object_id
                )));
            }
            for (side, b) in [("subject", &human_box), ("object", &object_box)] {
                b.validate().map_err(|e| {
                    Error::schema(format!("{}: hoi connection {idx} {side} box: {e}", entry.file_name))
                })?;
            }
            annotations.push(HoiAnnotation {
                human_box,
                object_box,
                hoi_id: conn.hoi_category_id,
                invisible: conn.invisible,
            });
        }

        let (width, height) = match (entry.width, entry.height) {
            (Some(w), Some(h)) => (w, h),
            _ => infer_dims(&boxes),
        };

        images.push(GroundTruthImage {
            image_id: entry.file_name,
            width,
            height,
            annotations,
        });
    }
    Ok(images)
}

/// Envelope of all boxes, used when the export carries no image size.
fn infer_dims(boxes: &[BoundingBox]) -> (f64, f64) {
    let mut w = 1.0f64;
    let mut h = 1.0f64;
    for b in boxes {
        w = w.max(b.x2.ceil());
        h = h.max(b.y2.ceil());
    }
    (w, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{HoiClass, ObjectCategory, Verb};

    fn vocab() -> Vocabulary {
        Vocabulary::new(
            vec![
                ObjectCategory { object_id: 1, name: "person".into() },
                ObjectCategory { object_id: 37, name: "sports_ball".into() },
            ],
            vec![
                Verb { verb_id: 58, name: "no_interaction".into(), is_no_interaction: true },
                Verb { verb_id: 48, name: "kick".into(), is_no_interaction: false },
            ],
            vec![
                HoiClass { hoi_id: 245, verb_id: 48, object_id: 37 },
                HoiClass { hoi_id: 246, verb_id: 58, object_id: 37 },
            ],
        )
        .unwrap()
    }

    fn write_temp(content: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(format!(
            "hoidiag-convert-test-{}-{}.json",
            std::process::id(),
            content.len()
        ));
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn converts_two_image_fixture_to_canonical() {
        let text = r#"[
          {"file_name": "HICO_test2015_00000001.jpg", "width": 640, "height": 480,
           "annotations": [
             {"bbox": [10, 10, 100, 200], "category_id": 1},
             {"bbox": [120, 50, 200, 120], "category_id": 37}],
           "hoi_annotation": [
             {"subject_id": 0, "object_id": 1, "category_id": 48, "hoi_category_id": 245}]},
          {"file_name": "HICO_test2015_00000002.jpg",
           "annotations": [
             {"bbox": [5, 5, 50, 90], "category_id": 1},
             {"bbox": [60, 10, 110, 60], "category_id": 37}],
           "hoi_annotation": [
             {"subject_id": 0, "object_id": 1, "hoi_category_id": 246, "invisible": 1}]}
        ]"#;
        let path = write_temp(text);
        let ds = convert_external_dataset(&path, ExternalFormat::HicoCommunityV1, &vocab()).unwrap();
        std::fs::remove_file(&path).ok();

        assert_eq!(ds.images.len(), 2);
        assert_eq!(ds.images[0].annotations[0].hoi_id, 245);
        assert!(!ds.images[0].annotations[0].invisible);
        assert!(ds.images[1].annotations[0].invisible);
        // inferred dims envelope the boxes
        assert_eq!(ds.images[1].width, 110.0);
        assert_eq!(ds.images[1].height, 90.0);

        // converting then parsing equals direct construction
        let reparsed = Dataset::from_json(&ds.to_json_pretty()).unwrap();
        assert_eq!(ds, reparsed);
    }

    #[test]
    fn swapped_corners_are_normalized() {
        let text = r#"[
          {"file_name": "a.jpg", "width": 300, "height": 300,
           "annotations": [
             {"bbox": [100, 200, 10, 10], "category_id": 1},
             {"bbox": [120, 50, 200, 120], "category_id": 37}],
           "hoi_annotation": [
             {"subject_id": 0, "object_id": 1, "hoi_category_id": 245}]}
        ]"#;
        let path = write_temp(text);
        let images = convert_external(&path, ExternalFormat::HicoCommunityV1, &vocab()).unwrap();
        std::fs::remove_file(&path).ok();
        let b = images[0].annotations[0].human_box;
        assert_eq!((b.x1, b.y1, b.x2, b.y2), (10.0, 10.0, 100.0, 200.0));
    }

    #[test]
    fn unknown_format_tag_is_rejected() {
        assert!(ExternalFormat::from_tag("voc-xml").is_err());
    }

    #[test]
    fn out_of_range_connection_index_is_schema_error() {
        let text = r#"[
          {"file_name": "a.jpg", "width": 300, "height": 300,
           "annotations": [{"bbox": [10, 10, 100, 200], "category_id": 1}],
           "hoi_annotation": [{"subject_id": 0, "object_id": 5, "hoi_category_id": 245}]}
        ]"#;
        let path = write_temp(text);
        let err = convert_external(&path, ExternalFormat::HicoCommunityV1, &vocab()).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(err.to_string().contains("out of range"));
    }

    #[test]
    fn object_category_mismatch_is_schema_error() {
        // box 1 is a person but hoi 245 is (kick, sports_ball)
        let text = r#"[
          {"file_name": "a.jpg", "width": 300, "height": 300,
           "annotations": [
             {"bbox": [10, 10, 100, 200], "category_id": 1},
             {"bbox": [120, 50, 200, 120], "category_id": 1}],
           "hoi_annotation": [{"subject_id": 0, "object_id": 1, "hoi_category_id": 245}]}
        ]"#;
        let path = write_temp(text);
        let err = convert_external(&path, ExternalFormat::HicoCommunityV1, &vocab()).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(err.to_string().contains("disagrees"));
    }
}
