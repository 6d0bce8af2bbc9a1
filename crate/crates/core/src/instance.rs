//! Instance resolution: merging per-annotation boxes into distinct person
//! and object instances.
//!
//! HICO-DET annotates pairs, not identities, so images that mention the
//! same person in several pairs repeat (or jitter) the person box. Boxes
//! are first deduplicated by exact coordinates, then clustered single-link
//! on IoU at the merge threshold. Objects only merge within one object
//! category.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::model::GroundTruthImage;
use crate::vocab::Vocabulary;

/// Union-find with path compression.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        // keep the smaller index as root so instance order follows
        // first appearance
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// A merged person. `canonical_box` is the first member in annotation order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersonInstance {
    pub instance_id: u32,
    pub member_boxes: Vec<BoundingBox>,
    pub canonical_box: BoundingBox,
}

/// A merged object of one category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectInstance {
    pub instance_id: u32,
    pub object_id: u32,
    pub member_boxes: Vec<BoundingBox>,
    pub canonical_box: BoundingBox,
}

/// The per-image instance graph: persons, objects, and the verbs annotated
/// on each (person, object) instance pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub image_id: String,
    pub persons: Vec<PersonInstance>,
    pub objects: Vec<ObjectInstance>,
    pub pair_verbs: BTreeMap<(u32, u32), BTreeSet<u32>>,
}

/// How two persons' interactions compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionRelation {
    Same,
    Different,
    NoSharedBasis,
}

/// Which annotations participate in instance resolution.
#[derive(Debug, Clone, Copy)]
pub struct ResolveOptions {
    pub merge_iou: f64,
    pub include_invisible: bool,
    pub include_no_interaction: bool,
}

impl ResolveOptions {
    /// Categorization defaults: visible interactive annotations only.
    pub fn for_categorization(merge_iou: f64) -> Self {
        ResolveOptions { merge_iou, include_invisible: false, include_no_interaction: false }
    }
}

pub const DEFAULT_MERGE_IOU: f64 = 0.7;

/// Clusters boxes (given as (annotation order, key, box)) and returns for
/// each input its cluster id plus each cluster's members in first-seen
/// order. `key` partitions boxes that must never merge.
fn cluster(
    boxes: &[(u32, BoundingBox)],
    merge_iou: f64,
) -> (Vec<usize>, Vec<Vec<usize>>) {
    // dedup by exact coordinates within a key
    let mut node_of: BTreeMap<(u32, [u8; 32]), usize> = BTreeMap::new();
    let mut nodes: Vec<(u32, BoundingBox)> = Vec::new();
    let mut node_for_box = Vec::with_capacity(boxes.len());
    for (key, b) in boxes {
        let coord_key = coord_bytes(b);
        let node = *node_of.entry((*key, coord_key)).or_insert_with(|| {
            nodes.push((*key, *b));
            nodes.len() - 1
        });
        node_for_box.push(node);
    }

    let mut uf = UnionFind::new(nodes.len());
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if nodes[i].0 == nodes[j].0 && iou(&nodes[i].1, &nodes[j].1) >= merge_iou {
                uf.union(i, j);
            }
        }
    }

    // cluster ids in first-appearance order of their earliest node
    let mut cluster_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut cluster_for_box = Vec::with_capacity(boxes.len());
    for &node in &node_for_box {
        let root = uf.find(node);
        let cluster = *cluster_of_root.entry(root).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[cluster].push(node);
        cluster_for_box.push(cluster);
    }
    (cluster_for_box, members)
}

fn coord_bytes(b: &BoundingBox) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (i, c) in [b.x1, b.y1, b.x2, b.y2].iter().enumerate() {
        out[i * 8..(i + 1) * 8].copy_from_slice(&c.to_bits().to_le_bytes());
    }
    out
}

/// Builds the instance graph for one image.
///
/// Annotations excluded by the visibility/no_interaction flags contribute
/// neither boxes nor pair verbs. Output is invariant to annotation order
/// up to instance id relabeling.
pub fn resolve_instances(
    image: &GroundTruthImage,
    vocab: &Vocabulary,
    opts: &ResolveOptions,
) -> Result<SceneGraph> {
    if !(0.5..=1.0).contains(&opts.merge_iou) {
        return Err(Error::contract(format!(
            "merge_iou must lie in [0.5, 1.0], got {}",
            opts.merge_iou
        )));
    }

    let kept: Vec<_> = image
        .annotations
        .iter()
        .filter(|a| {
            (opts.include_invisible || !a.invisible)
                && (opts.include_no_interaction || !vocab.is_no_interaction_hoi(a.hoi_id))
        })
        .collect();

    let human_boxes: Vec<(u32, BoundingBox)> = kept.iter().map(|a| (0, a.human_box)).collect();
    let object_boxes: Vec<(u32, BoundingBox)> = kept
        .iter()
        .map(|a| (vocab.object_of(a.hoi_id), a.object_box))
        .collect();

    let (person_of_ann, person_members) = cluster(&human_boxes, opts.merge_iou);
    let (object_of_ann, object_members) = cluster(&object_boxes, opts.merge_iou);

    let persons = person_members
        .iter()
        .enumerate()
        .map(|(id, _)| {
            let member_boxes: Vec<BoundingBox> = kept
                .iter()
                .zip(&person_of_ann)
                .filter(|(_, &c)| c == id)
                .map(|(a, _)| a.human_box)
                .collect();
            PersonInstance {
                instance_id: id as u32,
                canonical_box: member_boxes[0],
                member_boxes,
            }
        })
        .collect();

    let objects = object_members
        .iter()
        .enumerate()
        .map(|(id, _)| {
            let rows: Vec<_> = kept
                .iter()
                .zip(&object_of_ann)
                .filter(|(_, &c)| c == id)
                .collect();
            let member_boxes: Vec<BoundingBox> = rows.iter().map(|(a, _)| a.object_box).collect();
            ObjectInstance {
                instance_id: id as u32,
                object_id: vocab.object_of(rows[0].0.hoi_id),
                canonical_box: member_boxes[0],
                member_boxes,
            }
        })
        .collect();

    let mut pair_verbs: BTreeMap<(u32, u32), BTreeSet<u32>> = BTreeMap::new();
    for (idx, ann) in kept.iter().enumerate() {
        pair_verbs
            .entry((person_of_ann[idx] as u32, object_of_ann[idx] as u32))
            .or_default()
            .insert(vocab.verb_of(ann.hoi_id));
    }

    Ok(SceneGraph { image_id: image.image_id.clone(), persons, objects, pair_verbs })
}

impl SceneGraph {
    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    /// All verbs a person is annotated with, over all of its objects.
    pub fn verbs_of_person(&self, person: u32) -> BTreeSet<u32> {
        self.pair_verbs
            .iter()
            .filter(|((p, _), _)| *p == person)
            .flat_map(|(_, verbs)| verbs.iter().copied())
            .collect()
    }

    /// Object instance ids a person interacts with.
    pub fn objects_of_person(&self, person: u32) -> BTreeSet<u32> {
        self.pair_verbs
            .iter()
            .filter(|((p, _), _)| *p == person)
            .map(|((_, o), _)| *o)
            .collect()
    }

    pub fn object(&self, instance_id: u32) -> Option<&ObjectInstance> {
        self.objects.get(instance_id as usize)
    }
}

/// Compares two persons' interactions over their full verb sets.
///
/// `Different` covers both disjoint actions and the asymmetric case where
/// one person performs an additional action. `NoSharedBasis` is returned
/// when either person has no pair to compare over.
pub fn interaction_relation(g: &SceneGraph, p1: u32, p2: u32) -> Result<InteractionRelation> {
    for p in [p1, p2] {
        if g.persons.get(p as usize).is_none() {
            return Err(Error::contract(format!("unknown person instance id {p}")));
        }
    }
    let v1 = g.verbs_of_person(p1);
    let v2 = g.verbs_of_person(p2);
    if v1.is_empty() || v2.is_empty() {
        return Ok(InteractionRelation::NoSharedBasis);
    }
    if v1 == v2 {
        Ok(InteractionRelation::Same)
    } else {
        Ok(InteractionRelation::Different)
    }
}

/// Serializable view of a scene graph for the `--dump-scene-graphs` report.
#[derive(Debug, Clone, Serialize)]
pub struct SceneGraphDump {
    pub image_id: String,
    pub persons: Vec<PersonInstance>,
    pub objects: Vec<ObjectInstance>,
    pub pairs: Vec<PairDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDump {
    pub person: u32,
    pub object: u32,
    pub verbs: Vec<u32>,
}

impl SceneGraph {
    pub fn dump(&self) -> SceneGraphDump {
        SceneGraphDump {
            image_id: self.image_id.clone(),
            persons: self.persons.clone(),
            objects: self.objects.clone(),
            pairs: self
                .pair_verbs
                .iter()
                .map(|((p, o), verbs)| PairDump {
                    person: *p,
                    object: *o,
                    verbs: verbs.iter().copied().collect(),
                })
                .collect(),
        }
    }
}
