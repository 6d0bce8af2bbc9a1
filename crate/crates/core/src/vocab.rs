//! The HOI label space: object categories, verbs, and their combinations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An object category entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectCategory {
    pub object_id: u32,
    pub name: String,
}

/// A verb entry. `is_no_interaction` marks the null verb that denotes
/// co-presence without interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verb {
    pub verb_id: u32,
    pub name: String,
    #[serde(default)]
    pub is_no_interaction: bool,
}

/// One HOI class: a (verb, object) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoiClass {
    pub hoi_id: u32,
    pub verb_id: u32,
    pub object_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VocabularyData {
    object_categories: Vec<ObjectCategory>,
    verbs: Vec<Verb>,
    hoi_classes: Vec<HoiClass>,
}

/// The validated label space. Construction checks referential integrity:
/// unique hoi ids, unique (verb, object) pairs, valid verb/object
/// references, and at most one no_interaction class per object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    object_categories: Vec<ObjectCategory>,
    verbs: Vec<Verb>,
    hoi_classes: Vec<HoiClass>,
    by_hoi: BTreeMap<u32, HoiClass>,
    object_names: BTreeMap<u32, String>,
    verb_names: BTreeMap<u32, String>,
    no_interaction_verbs: BTreeSet<u32>,
}

impl TryFrom<VocabularyData> for Vocabulary {
    type Error = Error;

    fn try_from(data: VocabularyData) -> Result<Self> {
        Vocabulary::new(data.object_categories, data.verbs, data.hoi_classes)
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData {
            object_categories: v.object_categories,
            verbs: v.verbs,
            hoi_classes: v.hoi_classes,
        }
    }
}

impl Vocabulary {
    pub fn new(
        object_categories: Vec<ObjectCategory>,
        verbs: Vec<Verb>,
        hoi_classes: Vec<HoiClass>,
    ) -> Result<Self> {
        let mut object_names = BTreeMap::new();
        for o in &object_categories {
            if object_names.insert(o.object_id, o.name.clone()).is_some() {
                return Err(Error::schema(format!("duplicate object_id {}", o.object_id)));
            }
        }
        let mut verb_names = BTreeMap::new();
        let mut no_interaction_verbs = BTreeSet::new();
        for v in &verbs {
            if verb_names.insert(v.verb_id, v.name.clone()).is_some() {
                return Err(Error::schema(format!("duplicate verb_id {}", v.verb_id)));
            }
            if v.is_no_interaction {
                no_interaction_verbs.insert(v.verb_id);
            }
        }

        let mut by_hoi = BTreeMap::new();
        let mut pairs = BTreeSet::new();
        let mut no_int_per_object: BTreeMap<u32, u32> = BTreeMap::new();
        for h in &hoi_classes {
            if by_hoi.insert(h.hoi_id, *h).is_some() {
                return Err(Error::schema(format!("duplicate hoi_id {}", h.hoi_id)));
            }
            if !pairs.insert((h.verb_id, h.object_id)) {
                return Err(Error::schema(format!(
                    "duplicate (verb {}, object {}) pair in hoi classes",
                    h.verb_id, h.object_id
                )));
            }
            if !verb_names.contains_key(&h.verb_id) {
                return Err(Error::schema(format!(
                    "hoi class {} references unknown verb {}",
                    h.hoi_id, h.verb_id
                )));
            }
            if !object_names.contains_key(&h.object_id) {
                return Err(Error::schema(format!(
                    "hoi class {} references unknown object {}",
                    h.hoi_id, h.object_id
                )));
            }
            if no_interaction_verbs.contains(&h.verb_id) {
                let n = no_int_per_object.entry(h.object_id).or_insert(0);
                *n += 1;
                if *n > 1 {
                    return Err(Error::schema(format!(
                        "object {} has more than one no_interaction class",
                        h.object_id
                    )));
                }
            }
        }

        Ok(Vocabulary {
            object_categories,
            verbs,
            hoi_classes,
            by_hoi,
            object_names,
            verb_names,
            no_interaction_verbs,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn object_categories(&self) -> &[ObjectCategory] {
        &self.object_categories
    }

    pub fn verbs(&self) -> &[Verb] {
        &self.verbs
    }

    pub fn hoi_classes(&self) -> &[HoiClass] {
        &self.hoi_classes
    }

    pub fn contains_hoi(&self, hoi_id: u32) -> bool {
        self.by_hoi.contains_key(&hoi_id)
    }

    pub fn hoi(&self, hoi_id: u32) -> Result<&HoiClass> {
        self.by_hoi
            .get(&hoi_id)
            .ok_or_else(|| Error::schema(format!("unknown hoi_id {hoi_id}")))
    }

    /// Verb id of an hoi class. Panics on unknown ids; use after ingest
    /// validation only.
    pub fn verb_of(&self, hoi_id: u32) -> u32 {
        self.by_hoi[&hoi_id].verb_id
    }

    /// Object id of an hoi class. Panics on unknown ids.
    pub fn object_of(&self, hoi_id: u32) -> u32 {
        self.by_hoi[&hoi_id].object_id
    }

    pub fn is_no_interaction_verb(&self, verb_id: u32) -> bool {
        self.no_interaction_verbs.contains(&verb_id)
    }

    pub fn is_no_interaction_hoi(&self, hoi_id: u32) -> bool {
        self.by_hoi
            .get(&hoi_id)
            .map(|h| self.no_interaction_verbs.contains(&h.verb_id))
            .unwrap_or(false)
    }

    pub fn object_name(&self, object_id: u32) -> &str {
        self.object_names
            .get(&object_id)
            .map(String::as_str)
            .unwrap_or("?")
    }

    pub fn verb_name(&self, verb_id: u32) -> &str {
        self.verb_names
            .get(&verb_id)
            .map(String::as_str)
            .unwrap_or("?")
    }

    /// Looks up the hoi id of a (verb, object) pair if present.
    pub fn hoi_of_pair(&self, verb_id: u32, object_id: u32) -> Option<u32> {
        self.hoi_classes
            .iter()
            .find(|h| h.verb_id == verb_id && h.object_id == object_id)
            .map(|h| h.hoi_id)
    }
}
