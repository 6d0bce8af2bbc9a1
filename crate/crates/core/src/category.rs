//! Scene categorization: per-image filters, the diagnostic taxonomy, and
//! annotator-consensus merging.
//!
//! Single-person images split into SPSO (one object instance) and SPMO
//! (several). Multi-person images are placed on two axes: object relation
//! (same instance / same label / different label) and interaction relation
//! (same / different verbs), yielding categories A-F. Configurations that
//! do not fit a single cell are excluded.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{
    interaction_relation, resolve_instances, InteractionRelation, ResolveOptions, SceneGraph,
};
use crate::model::{Dataset, GroundTruthImage};
use crate::vocab::Vocabulary;

/// The diagnostic label space.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum SceneCategory {
    #[serde(rename = "SPSO")]
    Spso,
    #[serde(rename = "SPMO")]
    Spmo,
    A,
    B,
    C,
    D,
    E,
    F,
    #[serde(rename = "EXCLUDED")]
    Excluded,
}

impl SceneCategory {
    pub const ALL: [SceneCategory; 9] = [
        SceneCategory::Spso,
        SceneCategory::Spmo,
        SceneCategory::A,
        SceneCategory::B,
        SceneCategory::C,
        SceneCategory::D,
        SceneCategory::E,
        SceneCategory::F,
        SceneCategory::Excluded,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SceneCategory::Spso => "SPSO",
            SceneCategory::Spmo => "SPMO",
            SceneCategory::A => "A",
            SceneCategory::B => "B",
            SceneCategory::C => "C",
            SceneCategory::D => "D",
            SceneCategory::E => "E",
            SceneCategory::F => "F",
            SceneCategory::Excluded => "EXCLUDED",
        }
    }

    pub fn is_single_person(&self) -> bool {
        matches!(self, SceneCategory::Spso | SceneCategory::Spmo)
    }

    pub fn is_multi_person(&self) -> bool {
        matches!(
            self,
            SceneCategory::A
                | SceneCategory::B
                | SceneCategory::C
                | SceneCategory::D
                | SceneCategory::E
                | SceneCategory::F
        )
    }
}

impl std::fmt::Display for SceneCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SceneCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneCategory::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::schema(format!("unknown scene category '{s}'")))
    }
}

/// Why an image was excluded from the taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    OnlyNoInteraction,
    AllInvisible,
    MixedConfiguration,
    NoConsensus,
}

/// How an assignment was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentSource {
    RuleBased,
    Consensus,
}

/// The category assigned to one image, with the instance counts that
/// justify it. `hoi_count` is the number of annotations kept under the
/// categorization flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAssignment {
    pub image_id: String,
    pub category: SceneCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_reason: Option<ExclusionReason>,
    pub person_count: usize,
    pub object_instance_count: usize,
    pub hoi_count: usize,
    pub source: AssignmentSource,
}

impl CategoryAssignment {
    fn excluded(image_id: &str, reason: ExclusionReason) -> Self {
        CategoryAssignment {
            image_id: image_id.to_string(),
            category: SceneCategory::Excluded,
            exclusion_reason: Some(reason),
            person_count: 0,
            object_instance_count: 0,
            hoi_count: 0,
            source: AssignmentSource::RuleBased,
        }
    }
}

/// Outcome of the scope filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Drop(ExclusionReason),
}

/// Applies the scope filters: images whose annotations consist only of
/// no_interaction, or are all marked invisible, carry no usable
/// interaction evidence.
pub fn filter_image(image: &GroundTruthImage, vocab: &Vocabulary) -> FilterDecision {
    if image
        .annotations
        .iter()
        .all(|a| vocab.is_no_interaction_hoi(a.hoi_id))
    {
        return FilterDecision::Drop(ExclusionReason::OnlyNoInteraction);
    }
    if image.annotations.iter().all(|a| a.invisible) {
        return FilterDecision::Drop(ExclusionReason::AllInvisible);
    }
    FilterDecision::Keep
}

/// Pairwise object relation between two persons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ObjectRelation {
    SameInstance,
    SameLabel,
    DifferentLabel,
    Mixed,
}

fn pairwise_object_relation(g: &SceneGraph, p: u32, q: u32) -> ObjectRelation {
    let ip = g.objects_of_person(p);
    let iq = g.objects_of_person(q);
    if ip == iq && ip.len() == 1 {
        return ObjectRelation::SameInstance;
    }
    if ip.intersection(&iq).next().is_some() {
        // partial sharing does not fit a single cell
        return ObjectRelation::Mixed;
    }
    let labels_p: std::collections::BTreeSet<u32> = ip
        .iter()
        .map(|o| g.object(*o).expect("pair references existing object").object_id)
        .collect();
    let labels_q: std::collections::BTreeSet<u32> = iq
        .iter()
        .map(|o| g.object(*o).expect("pair references existing object").object_id)
        .collect();
    if labels_p.len() == 1 && labels_p == labels_q {
        ObjectRelation::SameLabel
    } else if labels_p.intersection(&labels_q).next().is_none() {
        ObjectRelation::DifferentLabel
    } else {
        ObjectRelation::Mixed
    }
}

/// Assigns a category to a non-empty scene graph built under the
/// categorization flags.
pub fn categorize_graph(g: &SceneGraph) -> Result<CategoryAssignment> {
    if g.is_empty() || g.pair_verbs.is_empty() {
        return Err(Error::contract(
            "categorize_graph requires a scene graph with at least one person and pair",
        ));
    }
    let person_count = g.persons.len();
    let object_instance_count = g.objects.len();
    let hoi_count: usize = g.pair_verbs.values().map(|v| v.len()).sum();

    let base = |category, reason| CategoryAssignment {
        image_id: g.image_id.clone(),
        category,
        exclusion_reason: reason,
        person_count,
        object_instance_count,
        hoi_count,
        source: AssignmentSource::RuleBased,
    };

    if person_count == 1 {
        let category = if object_instance_count == 1 {
            SceneCategory::Spso
        } else {
            SceneCategory::Spmo
        };
        return Ok(base(category, None));
    }

    // both axes must be uniform over all person pairs
    let ids: Vec<u32> = (0..person_count as u32).collect();
    let mut object_axis: Option<ObjectRelation> = None;
    let mut all_same_interaction = true;
    for (i, &p) in ids.iter().enumerate() {
        for &q in &ids[i + 1..] {
            let rel = pairwise_object_relation(g, p, q);
            if rel == ObjectRelation::Mixed {
                return Ok(base(
                    SceneCategory::Excluded,
                    Some(ExclusionReason::MixedConfiguration),
                ));
            }
            match object_axis {
                None => object_axis = Some(rel),
                Some(prev) if prev != rel => {
                    return Ok(base(
                        SceneCategory::Excluded,
                        Some(ExclusionReason::MixedConfiguration),
                    ));
                }
                Some(_) => {}
            }
            if interaction_relation(g, p, q)? != InteractionRelation::Same {
                all_same_interaction = false;
            }
        }
    }

    let category = match (object_axis.expect("at least one person pair"), all_same_interaction) {
        (ObjectRelation::SameInstance, true) => SceneCategory::A,
        (ObjectRelation::SameInstance, false) => SceneCategory::B,
        (ObjectRelation::SameLabel, true) => SceneCategory::C,
        (ObjectRelation::SameLabel, false) => SceneCategory::D,
        (ObjectRelation::DifferentLabel, true) => SceneCategory::E,
        (ObjectRelation::DifferentLabel, false) => SceneCategory::F,
        (ObjectRelation::Mixed, _) => unreachable!("mixed handled above"),
    };
    Ok(base(category, None))
}

/// Options for the rule-based categorization pipeline.
#[derive(Debug, Clone, Copy)]
pub struct CategorizeOptions {
    pub merge_iou: f64,
}

impl Default for CategorizeOptions {
    fn default() -> Self {
        CategorizeOptions { merge_iou: crate::instance::DEFAULT_MERGE_IOU }
    }
}

/// Filters and categorizes one image.
pub fn categorize_image(
    image: &GroundTruthImage,
    vocab: &Vocabulary,
    opts: &CategorizeOptions,
) -> Result<CategoryAssignment> {
    if let FilterDecision::Drop(reason) = filter_image(image, vocab) {
        return Ok(CategoryAssignment::excluded(&image.image_id, reason));
    }
    let g = resolve_instances(
        image,
        vocab,
        &ResolveOptions::for_categorization(opts.merge_iou),
    )?;
    if g.is_empty() {
        // kept nothing even though the filters passed (e.g. the only
        // visible annotations are no_interaction and the interactive ones
        // are invisible); attribute the exclusion to whichever filter
        // removed more annotations
        let n_no_int = image
            .annotations
            .iter()
            .filter(|a| vocab.is_no_interaction_hoi(a.hoi_id))
            .count();
        let n_invisible = image
            .annotations
            .iter()
            .filter(|a| !vocab.is_no_interaction_hoi(a.hoi_id) && a.invisible)
            .count();
        let reason = if n_no_int >= n_invisible {
            ExclusionReason::OnlyNoInteraction
        } else {
            ExclusionReason::AllInvisible
        };
        return Ok(CategoryAssignment::excluded(&image.image_id, reason));
    }
    categorize_graph(&g)
}

/// Categorizes a whole dataset. Per-image work is independent; results are
/// returned in dataset order.
pub fn categorize_dataset(ds: &Dataset, opts: &CategorizeOptions) -> Result<Vec<CategoryAssignment>> {
    use rayon::prelude::*;
    ds.images
        .par_iter()
        .map(|image| categorize_image(image, &ds.vocabulary, opts))
        .collect()
}

/// A label file: image id to category, as voted by one annotator.
pub type LabelFile = BTreeMap<String, SceneCategory>;

pub fn parse_label_file(path: &Path) -> Result<LabelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Merges one or more annotator label files by strict majority vote.
///
/// Images where no category wins a strict majority are excluded with
/// `NoConsensus`. All files must cover the same image set.
pub fn consensus(labels: &[LabelFile]) -> Result<BTreeMap<String, CategoryAssignment>> {
    let first = labels
        .first()
        .ok_or_else(|| Error::contract("consensus requires at least one label file"))?;
    for (idx, file) in labels.iter().enumerate().skip(1) {
        if file.len() != first.len() || !file.keys().eq(first.keys()) {
            let missing: Vec<&String> = first.keys().filter(|k| !file.contains_key(*k)).collect();
            let extra: Vec<&String> = file.keys().filter(|k| !first.contains_key(*k)).collect();
            return Err(Error::schema(format!(
                "label file {idx} covers a different image set (missing {missing:?}, extra {extra:?})"
            )));
        }
    }

    let majority = labels.len() / 2 + 1;
    let mut out = BTreeMap::new();
    for image_id in first.keys() {
        let mut votes: BTreeMap<SceneCategory, usize> = BTreeMap::new();
        for file in labels {
            *votes.entry(file[image_id]).or_insert(0) += 1;
        }
        let winner = votes.iter().find(|(_, n)| **n >= majority).map(|(c, _)| *c);
        let (category, reason) = match winner {
            Some(SceneCategory::Excluded) => {
                // annotators agreed the configuration fits no single cell
                (SceneCategory::Excluded, Some(ExclusionReason::MixedConfiguration))
            }
            Some(c) => (c, None),
            None => (SceneCategory::Excluded, Some(ExclusionReason::NoConsensus)),
        };
        out.insert(
            image_id.clone(),
            CategoryAssignment {
                image_id: image_id.clone(),
                category,
                exclusion_reason: reason,
                person_count: 0,
                object_instance_count: 0,
                hoi_count: 0,
                source: AssignmentSource::Consensus,
            },
        );
    }
    Ok(out)
}

/// A rule-based assignment overridden by consensus where the two disagree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Disagreement {
    pub image_id: String,
    pub rule_based: SceneCategory,
    pub consensus: SceneCategory,
}

/// Applies consensus labels on top of rule-based assignments. The consensus
/// category wins; instance counts are kept from the rule-based pass.
pub fn merge_consensus(
    rule_based: &[CategoryAssignment],
    voted: &BTreeMap<String, CategoryAssignment>,
) -> (Vec<CategoryAssignment>, Vec<Disagreement>) {
    let mut merged = Vec::with_capacity(rule_based.len());
    let mut disagreements = Vec::new();
    for a in rule_based {
        match voted.get(&a.image_id) {
            Some(v) => {
                if v.category != a.category {
                    disagreements.push(Disagreement {
                        image_id: a.image_id.clone(),
                        rule_based: a.category,
                        consensus: v.category,
                    });
                }
                merged.push(CategoryAssignment {
                    category: v.category,
                    exclusion_reason: v.exclusion_reason,
                    source: AssignmentSource::Consensus,
                    ..a.clone()
                });
            }
            None => merged.push(a.clone()),
        }
    }
    (merged, disagreements)
}

/// Per-category image and HOI-instance counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub images: usize,
    pub hoi_instances: usize,
}

/// The statistics block mirrored into `categories.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub total_images: usize,
    pub per_category: BTreeMap<SceneCategory, CategoryCount>,
    pub single_person_images: usize,
    pub multi_person_images: usize,
    pub excluded_images: usize,
}

/// Tabulates image and HOI counts per category.
pub fn category_statistics(assignments: &[CategoryAssignment]) -> CategoryStats {
    let mut per_category: BTreeMap<SceneCategory, CategoryCount> = BTreeMap::new();
    for c in SceneCategory::ALL {
        per_category.insert(c, CategoryCount::default());
    }
    for a in assignments {
        let cell = per_category.entry(a.category).or_default();
        cell.images += 1;
        cell.hoi_instances += a.hoi_count;
    }
    let count_where = |f: fn(&SceneCategory) -> bool| {
        per_category
            .iter()
            .filter(|(c, _)| f(c))
            .map(|(_, n)| n.images)
            .sum()
    };
    let single_person_images = count_where(SceneCategory::is_single_person);
    let multi_person_images = count_where(SceneCategory::is_multi_person);
    let excluded_images = count_where(|c| matches!(c, SceneCategory::Excluded));
    CategoryStats {
        total_images: assignments.len(),
        per_category,
        single_person_images,
        multi_person_images,
        excluded_images,
    }
}
