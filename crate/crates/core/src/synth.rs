//! Synthetic scene generator with labeled error injections.
//!
//! Scenes are laid out on a slot grid so distinct instances never overlap,
//! while injected predictions copy ground-truth boxes with a bounded
//! jitter. Hit-side IoUs stay above 0.8 and miss-side IoUs are exactly 0,
//! leaving a wide margin around the 0.5 matching threshold. Every
//! generated prediction carries its intended verdict and error flags in
//! the injection log, which downstream tests treat as ground truth.
//!
//! Generation is a pure function of the [`SynthSpec`]: the RNG is
//! SplitMix64 (a documented 64-bit shift-multiply sequence), scenes derive
//! their own seeds from the stream, and floating point values are produced
//! with fixed expressions, so outputs are byte-identical across runs and
//! platforms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::category::{
    categorize_image, CategorizeOptions, ExclusionReason, SceneCategory,
};
use crate::decompose::ErrorFlags;
use crate::error::{Error, Result};
use crate::eval::Verdict;
use crate::geometry::BoundingBox;
use crate::model::{Dataset, GroundTruthImage, HoiAnnotation, Prediction, PredictionSet};
use crate::vocab::{HoiClass, ObjectCategory, Verb, Vocabulary};

/// SplitMix64. State advances by the golden-ratio constant; each output is
/// the state mixed through two shift-multiply rounds.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [lo, hi] inclusive.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.range(0, i);
            slice.swap(i, j);
        }
    }

    pub fn pick<'a, T>(&mut self, slice: &'a [T]) -> &'a T {
        &slice[self.range(0, slice.len() - 1)]
    }
}

/// Generation target: a taxonomy cell or one of the excluded shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthCategory {
    Spso,
    Spmo,
    A,
    B,
    C,
    D,
    E,
    F,
    FilteredNoInteraction,
    FilteredInvisible,
    Mixed,
}

impl SynthCategory {
    pub const ALL: [SynthCategory; 11] = [
        SynthCategory::Spso,
        SynthCategory::Spmo,
        SynthCategory::A,
        SynthCategory::B,
        SynthCategory::C,
        SynthCategory::D,
        SynthCategory::E,
        SynthCategory::F,
        SynthCategory::FilteredNoInteraction,
        SynthCategory::FilteredInvisible,
        SynthCategory::Mixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SynthCategory::Spso => "SPSO",
            SynthCategory::Spmo => "SPMO",
            SynthCategory::A => "A",
            SynthCategory::B => "B",
            SynthCategory::C => "C",
            SynthCategory::D => "D",
            SynthCategory::E => "E",
            SynthCategory::F => "F",
            SynthCategory::FilteredNoInteraction => "FILTERED_NO_INTERACTION",
            SynthCategory::FilteredInvisible => "FILTERED_INVISIBLE",
            SynthCategory::Mixed => "MIXED",
        }
    }

    /// The rule-based category and exclusion reason every scene of this
    /// target must produce.
    pub fn expected(&self) -> (SceneCategory, Option<ExclusionReason>) {
        match self {
            SynthCategory::Spso => (SceneCategory::Spso, None),
            SynthCategory::Spmo => (SceneCategory::Spmo, None),
            SynthCategory::A => (SceneCategory::A, None),
            SynthCategory::B => (SceneCategory::B, None),
            SynthCategory::C => (SceneCategory::C, None),
            SynthCategory::D => (SceneCategory::D, None),
            SynthCategory::E => (SceneCategory::E, None),
            SynthCategory::F => (SceneCategory::F, None),
            SynthCategory::FilteredNoInteraction => {
                (SceneCategory::Excluded, Some(ExclusionReason::OnlyNoInteraction))
            }
            SynthCategory::FilteredInvisible => {
                (SceneCategory::Excluded, Some(ExclusionReason::AllInvisible))
            }
            SynthCategory::Mixed => {
                (SceneCategory::Excluded, Some(ExclusionReason::MixedConfiguration))
            }
        }
    }

}

impl std::str::FromStr for SynthCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_uppercase().replace('-', "_");
        SynthCategory::ALL
            .iter()
            .copied()
            .find(|c| c.name() == upper)
            .ok_or_else(|| Error::schema(format!("unknown synth category '{s}'")))
    }
}

/// Per-scene injection counts. True positives cover every ground-truth
/// annotation when enabled; the six error types produce one false positive
/// each per count.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub cover_true_positives: bool,
    pub human_box: usize,
    pub object_box: usize,
    pub object_class: usize,
    pub verb: usize,
    pub pairing: usize,
    pub duplicate: usize,
}

impl InjectionPlan {
    pub fn none() -> Self {
        InjectionPlan::default()
    }

    pub fn tp_only() -> Self {
        InjectionPlan { cover_true_positives: true, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeometryBounds {
    pub width: f64,
    pub height: f64,
}

impl Default for GeometryBounds {
    fn default() -> Self {
        GeometryBounds { width: 1000.0, height: 1000.0 }
    }
}

/// A generation request: seed, category mix (absolute scene counts),
/// person count range for multi-person cells, injections, and bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub category_mix: Vec<(SynthCategory, usize)>,
    /// Person count range for categories A-F (single-person cells always
    /// use one person, mixed scenes three). E and F are capped at the
    /// number of distinct interactive object classes.
    pub person_range: (usize, usize),
    pub injections: InjectionPlan,
    pub bounds: GeometryBounds,
}

impl SynthSpec {
    pub fn scene_count(&self) -> usize {
        self.category_mix.iter().map(|(_, n)| n).sum()
    }

    /// Checks that every requested category and injection is constructible
    /// under the geometry bounds.
    pub fn validate(&self) -> Result<()> {
        if self.category_mix.iter().all(|(_, n)| *n == 0) {
            return Err(Error::contract("synth spec requests zero scenes"));
        }
        let (lo, hi) = self.person_range;
        if lo < 1 || hi < lo {
            return Err(Error::contract(format!("invalid person range {lo}..={hi}")));
        }
        let has = |c: SynthCategory| self.category_mix.iter().any(|(k, n)| *k == c && *n > 0);
        for cat in [SynthCategory::A, SynthCategory::B, SynthCategory::C, SynthCategory::D,
                    SynthCategory::E, SynthCategory::F]
        {
            if has(cat) && hi < 2 {
                return Err(Error::contract(format!(
                    "category {} needs at least two persons but the range tops out at {hi}",
                    cat.name()
                )));
            }
        }
        if (has(SynthCategory::E) || has(SynthCategory::F)) && lo > INTERACTIVE_OBJECTS.len() {
            return Err(Error::contract(format!(
                "categories E/F support at most {} persons (one per object class)",
                INTERACTIVE_OBJECTS.len()
            )));
        }
        if self.injections.pairing > 0 && !(has(SynthCategory::C) || has(SynthCategory::D)) {
            return Err(Error::contract(
                "pairing injections need a second same-class instance with no annotated \
                 cross pair; request category C or D scenes",
            ));
        }
        if self.injections.duplicate > 0 && !self.injections.cover_true_positives {
            return Err(Error::contract(
                "duplicate injections need their anchor true positives; enable \
                 cover_true_positives",
            ));
        }

        // worst-case slot demand per scene
        let persons_max = self
            .category_mix
            .iter()
            .filter(|(_, n)| *n > 0)
            .map(|(c, _)| match c {
                SynthCategory::Spso | SynthCategory::Spmo => 1,
                SynthCategory::E | SynthCategory::F => hi.min(INTERACTIVE_OBJECTS.len()),
                SynthCategory::Mixed => 3,
                SynthCategory::FilteredNoInteraction | SynthCategory::FilteredInvisible => 1,
                _ => hi,
            })
            .max()
            .unwrap_or(1);
        let objects_max = persons_max.max(3);
        let junk = self.injections.human_box + self.injections.object_box;
        let demand = persons_max + objects_max + 2 + junk;
        let grid = SlotGrid::dims(&self.bounds);
        let available = grid.0 * grid.1;
        if available < demand {
            return Err(Error::contract(format!(
                "geometry bounds {}x{} offer {available} slots but scenes may need {demand}",
                self.bounds.width, self.bounds.height
            )));
        }
        Ok(())
    }
}

/// Intended verdict and flags for one generated prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionEntry {
    pub prediction_index: usize,
    pub verdict: Verdict,
    pub flags: ErrorFlags,
}

/// The generation oracle: what the evaluator and decomposer must find.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InjectionLog {
    pub entries: Vec<InjectionEntry>,
}

impl InjectionLog {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serialization cannot fail")
    }
}

// Synthetic vocabulary ids.
const HORSE: u32 = 1;
const BALL: u32 = 2;
const CUP: u32 = 3;
const BICYCLE: u32 = 4;
const BENCH: u32 = 5;

const NO_INTERACTION: u32 = 1;
const RIDE: u32 = 2;
const HOLD: u32 = 3;
const KICK: u32 = 4;
const CARRY: u32 = 5;
const INSPECT: u32 = 6;

/// Object classes scenes interact with; bench is reserved for garnish
/// annotations so injected predictions never collide with it.
const INTERACTIVE_OBJECTS: [u32; 4] = [HORSE, BALL, CUP, BICYCLE];
/// Objects with at least three interactive verbs, required where a pair
/// carries two verbs and a spare must remain for verb injections.
const RICH_OBJECTS: [u32; 3] = [HORSE, BALL, CUP];

fn interactive_verbs(object_id: u32) -> &'static [u32] {
    match object_id {
        HORSE => &[RIDE, HOLD, INSPECT],
        BALL => &[HOLD, KICK, CARRY, INSPECT],
        CUP => &[HOLD, CARRY, INSPECT],
        BICYCLE => &[RIDE, INSPECT],
        BENCH => &[INSPECT],
        _ => &[],
    }
}

/// The fixed label space of generated datasets.
pub fn synth_vocabulary() -> Vocabulary {
    let objects = vec![
        (HORSE, "horse"),
        (BALL, "sports_ball"),
        (CUP, "cup"),
        (BICYCLE, "bicycle"),
        (BENCH, "bench"),
    ];
    let verbs = vec![
        (NO_INTERACTION, "no_interaction", true),
        (RIDE, "ride", false),
        (HOLD, "hold", false),
        (KICK, "kick", false),
        (CARRY, "carry", false),
        (INSPECT, "inspect", false),
    ];
    let mut hoi_classes = Vec::new();
    let mut next_id = 1u32;
    for (object_id, _) in &objects {
        hoi_classes.push(HoiClass { hoi_id: next_id, verb_id: NO_INTERACTION, object_id: *object_id });
        next_id += 1;
        for verb_id in interactive_verbs(*object_id) {
            hoi_classes.push(HoiClass { hoi_id: next_id, verb_id: *verb_id, object_id: *object_id });
            next_id += 1;
        }
    }
    Vocabulary::new(
        objects
            .into_iter()
            .map(|(object_id, name)| ObjectCategory { object_id, name: name.into() })
            .collect(),
        verbs
            .into_iter()
            .map(|(verb_id, name, is_no_interaction)| Verb {
                verb_id,
                name: name.into(),
                is_no_interaction,
            })
            .collect(),
        hoi_classes,
    )
    .expect("the synthetic vocabulary is consistent")
}

const SLOT_BOX: f64 = 120.0;
const SLOT_STRIDE: f64 = 160.0;
const SLOT_MARGIN: f64 = 20.0;
const JITTER_MAX: i64 = 6;

struct SlotGrid {
    slots: Vec<BoundingBox>,
    next: usize,
}

impl SlotGrid {
    fn dims(bounds: &GeometryBounds) -> (usize, usize) {
        let fit = |extent: f64| {
            let usable = extent - 2.0 * SLOT_MARGIN - SLOT_BOX - JITTER_MAX as f64;
            if usable < 0.0 {
                0
            } else {
                (usable / SLOT_STRIDE) as usize + 1
            }
        };
        (fit(bounds.width), fit(bounds.height))
    }

    fn new(bounds: &GeometryBounds, rng: &mut SplitMix64) -> Self {
        let (cols, rows) = Self::dims(bounds);
        let mut slots = Vec::with_capacity(cols * rows);
        for row in 0..rows {
            for col in 0..cols {
                let x = SLOT_MARGIN + col as f64 * SLOT_STRIDE;
                let y = SLOT_MARGIN + row as f64 * SLOT_STRIDE;
                slots.push(BoundingBox::new(x, y, x + SLOT_BOX, y + SLOT_BOX));
            }
        }
        rng.shuffle(&mut slots);
        SlotGrid { slots, next: 0 }
    }

    fn take(&mut self) -> BoundingBox {
        let b = self.slots[self.next];
        self.next += 1;
        b
    }
}

/// Integer translation of up to `JITTER_MAX` pixels per axis; keeps IoU
/// with the source box above 0.8 and stays inside the slot's clearance.
fn jitter(b: &BoundingBox, rng: &mut SplitMix64) -> BoundingBox {
    let dx = rng.range(0, 2 * JITTER_MAX as usize) as i64 - JITTER_MAX;
    let dy = rng.range(0, 2 * JITTER_MAX as usize) as i64 - JITTER_MAX;
    BoundingBox::new(
        b.x1 + dx as f64,
        b.y1 + dy as f64,
        b.x2 + dx as f64,
        b.y2 + dy as f64,
    )
}

/// One annotated pair eligible as an injection target.
struct PairSite {
    human: BoundingBox,
    object: BoundingBox,
    object_id: u32,
    verbs: Vec<u32>,
    first_hoi: u32,
}

struct SceneDraft {
    annotations: Vec<HoiAnnotation>,
    pairs: Vec<PairSite>,
    persons: Vec<BoundingBox>,
}

impl SceneDraft {
    fn new() -> Self {
        SceneDraft { annotations: Vec::new(), pairs: Vec::new(), persons: Vec::new() }
    }

    #[allow(clippy::too_many_arguments)]
    fn add_pair(
        &mut self,
        vocab: &Vocabulary,
        human: BoundingBox,
        object: BoundingBox,
        object_id: u32,
        verbs: &[u32],
        invisible: bool,
        targetable: bool,
    ) {
        let mut hois = Vec::with_capacity(verbs.len());
        for verb in verbs {
            let hoi_id = vocab
                .hoi_of_pair(*verb, object_id)
                .expect("scene builders only use vocabulary pairs");
            hois.push(hoi_id);
            self.annotations.push(HoiAnnotation {
                human_box: human,
                object_box: object,
                hoi_id,
                invisible,
            });
        }
        if targetable {
            self.pairs.push(PairSite {
                human,
                object,
                object_id,
                verbs: verbs.to_vec(),
                first_hoi: hois[0],
            });
        }
    }
}

fn person_count_for(
    category: SynthCategory,
    range: (usize, usize),
    rng: &mut SplitMix64,
) -> usize {
    match category {
        SynthCategory::Spso | SynthCategory::Spmo => 1,
        SynthCategory::FilteredNoInteraction | SynthCategory::FilteredInvisible => 1,
        SynthCategory::Mixed => 3,
        SynthCategory::E | SynthCategory::F => {
            let hi = range.1.min(INTERACTIVE_OBJECTS.len());
            let lo = range.0.max(2).min(hi);
            rng.range(lo, hi)
        }
        _ => rng.range(range.0.max(2), range.1),
    }
}

/// Verbs for one pair: usually one, sometimes two on rich objects (so a
/// spare verb always remains for verb injections).
fn draw_pair_verbs(object_id: u32, rng: &mut SplitMix64) -> Vec<u32> {
    let verbs = interactive_verbs(object_id);
    let first = *rng.pick(verbs);
    if verbs.len() >= 3 && rng.next_f64() < 0.3 {
        let second = loop {
            let v = *rng.pick(verbs);
            if v != first {
                break v;
            }
        };
        vec![first, second]
    } else {
        vec![first]
    }
}

fn build_scene(
    category: SynthCategory,
    vocab: &Vocabulary,
    grid: &mut SlotGrid,
    persons: usize,
    rng: &mut SplitMix64,
) -> SceneDraft {
    let mut draft = SceneDraft::new();
    for _ in 0..persons {
        draft.persons.push(grid.take());
    }
    let p = |draft: &SceneDraft, i: usize| draft.persons[i];

    match category {
        SynthCategory::Spso => {
            let object_id = *rng.pick(&INTERACTIVE_OBJECTS);
            let verbs = draw_pair_verbs(object_id, rng);
            let obj = grid.take();
            draft.add_pair(vocab, p(&draft, 0), obj, object_id, &verbs, false, true);
        }
        SynthCategory::Spmo => {
            let n = rng.range(2, 3);
            for _ in 0..n {
                let object_id = *rng.pick(&INTERACTIVE_OBJECTS);
                let verb = *rng.pick(interactive_verbs(object_id));
                let obj = grid.take();
                draft.add_pair(vocab, p(&draft, 0), obj, object_id, &[verb], false, true);
            }
        }
        SynthCategory::A => {
            let object_id = *rng.pick(&INTERACTIVE_OBJECTS);
            let verb = *rng.pick(interactive_verbs(object_id));
            let obj = grid.take();
            for i in 0..persons {
                draft.add_pair(vocab, p(&draft, i), obj, object_id, &[verb], false, true);
            }
        }
        SynthCategory::B => {
            let object_id = *rng.pick(&RICH_OBJECTS);
            let verbs = interactive_verbs(object_id);
            let shared = verbs[rng.range(0, verbs.len() - 1)];
            let extra = loop {
                let v = *rng.pick(verbs);
                if v != shared {
                    break v;
                }
            };
            let obj = grid.take();
            draft.add_pair(vocab, p(&draft, 0), obj, object_id, &[shared, extra], false, true);
            for i in 1..persons {
                draft.add_pair(vocab, p(&draft, i), obj, object_id, &[shared], false, true);
            }
        }
        SynthCategory::C => {
            let object_id = *rng.pick(&INTERACTIVE_OBJECTS);
            let verb = *rng.pick(interactive_verbs(object_id));
            for i in 0..persons {
                let obj = grid.take();
                draft.add_pair(vocab, p(&draft, i), obj, object_id, &[verb], false, true);
            }
        }
        SynthCategory::D => {
            let object_id = *rng.pick(&RICH_OBJECTS);
            let verbs = interactive_verbs(object_id);
            let v1 = verbs[0];
            let v2 = verbs[1];
            for i in 0..persons {
                let obj = grid.take();
                let verb = if i % 2 == 0 { v1 } else { v2 };
                draft.add_pair(vocab, p(&draft, i), obj, object_id, &[verb], false, true);
            }
        }
        SynthCategory::E => {
            let mut classes = INTERACTIVE_OBJECTS.to_vec();
            rng.shuffle(&mut classes);
            for (i, object_id) in classes.into_iter().take(persons).enumerate() {
                let obj = grid.take();
                draft.add_pair(vocab, p(&draft, i), obj, object_id, &[INSPECT], false, true);
            }
        }
        SynthCategory::F => {
            // distinct classes with pairwise-distinct verbs
            let mut assignments =
                vec![(HORSE, RIDE), (BALL, KICK), (CUP, CARRY), (BICYCLE, INSPECT)];
            rng.shuffle(&mut assignments);
            for (i, (object_id, verb)) in assignments.into_iter().take(persons).enumerate() {
                let obj = grid.take();
                draft.add_pair(vocab, p(&draft, i), obj, object_id, &[verb], false, true);
            }
        }
        SynthCategory::FilteredNoInteraction => {
            let n = rng.range(1, 2);
            for _ in 0..n {
                let object_id = *rng.pick(&INTERACTIVE_OBJECTS);
                let obj = grid.take();
                draft.add_pair(vocab, p(&draft, 0), obj, object_id, &[NO_INTERACTION], false, true);
            }
        }
        SynthCategory::FilteredInvisible => {
            let n = rng.range(1, 2);
            for _ in 0..n {
                let object_id = *rng.pick(&INTERACTIVE_OBJECTS);
                let verb = *rng.pick(interactive_verbs(object_id));
                let obj = grid.take();
                draft.add_pair(vocab, p(&draft, 0), obj, object_id, &[verb], true, true);
            }
        }
        SynthCategory::Mixed => {
            // two persons share an instance, the third uses another label
            let shared_id = *rng.pick(&RICH_OBJECTS);
            let verb = *rng.pick(interactive_verbs(shared_id));
            let obj = grid.take();
            draft.add_pair(vocab, p(&draft, 0), obj, shared_id, &[verb], false, true);
            draft.add_pair(vocab, p(&draft, 1), obj, shared_id, &[verb], false, true);
            let other_id = *INTERACTIVE_OBJECTS.iter().find(|o| **o != shared_id).expect("4 classes");
            let other_verb = *rng.pick(interactive_verbs(other_id));
            let obj2 = grid.take();
            draft.add_pair(vocab, p(&draft, 2), obj2, other_id, &[other_verb], false, true);
        }
    }

    // garnish: annotations the categorization flags exclude, exercising the
    // filters inside evaluation-scale fixtures (bench class only, so
    // injected predictions never interact with them)
    let categorizable = !matches!(
        category,
        SynthCategory::FilteredNoInteraction | SynthCategory::FilteredInvisible
    );
    if categorizable {
        if rng.next_f64() < 0.2 {
            let obj = grid.take();
            draft.add_pair(vocab, p(&draft, 0), obj, BENCH, &[NO_INTERACTION], false, false);
        }
        if rng.next_f64() < 0.2 {
            let obj = grid.take();
            draft.add_pair(vocab, p(&draft, 0), obj, BENCH, &[INSPECT], true, false);
        }
    }

    draft
}

struct ScenePrediction {
    human_box: BoundingBox,
    object_box: BoundingBox,
    hoi_id: u32,
    score: f64,
    verdict: Verdict,
    flags: ErrorFlags,
}

fn flag(which: &str) -> ErrorFlags {
    let mut f = ErrorFlags::none();
    match which {
        "human_box" => f.human_box = true,
        "object_box" => f.object_box = true,
        "object_class" => f.object_class = true,
        "verb" => f.verb = true,
        "pairing" => f.pairing = true,
        "duplicate" => f.duplicate = true,
        _ => unreachable!(),
    }
    f
}

fn inject_scene(
    category: SynthCategory,
    draft: &SceneDraft,
    plan: &InjectionPlan,
    vocab: &Vocabulary,
    grid: &mut SlotGrid,
    rng: &mut SplitMix64,
) -> Vec<ScenePrediction> {
    let mut preds = Vec::new();
    let tp_score = |rng: &mut SplitMix64| rng.uniform(0.60, 0.95);
    let fp_score = |rng: &mut SplitMix64| rng.uniform(0.05, 0.95);
    let dup_score = |rng: &mut SplitMix64| rng.uniform(0.10, 0.45);

    if plan.cover_true_positives {
        for ann in &draft.annotations {
            preds.push(ScenePrediction {
                human_box: jitter(&ann.human_box, rng),
                object_box: jitter(&ann.object_box, rng),
                hoi_id: ann.hoi_id,
                score: tp_score(rng),
                verdict: Verdict::Tp,
                flags: ErrorFlags::none(),
            });
        }
    }
    if draft.pairs.is_empty() {
        return preds;
    }
    let pair_at = |i: usize| &draft.pairs[i % draft.pairs.len()];

    for i in 0..plan.human_box {
        let pair = pair_at(i);
        let junk = grid.take();
        preds.push(ScenePrediction {
            human_box: junk,
            object_box: jitter(&pair.object, rng),
            hoi_id: pair.first_hoi,
            score: fp_score(rng),
            verdict: Verdict::Fp,
            flags: flag("human_box"),
        });
    }
    for i in 0..plan.object_box {
        let pair = pair_at(i);
        let junk = grid.take();
        preds.push(ScenePrediction {
            human_box: jitter(&pair.human, rng),
            object_box: junk,
            hoi_id: pair.first_hoi,
            score: fp_score(rng),
            verdict: Verdict::Fp,
            flags: flag("object_box"),
        });
    }
    for i in 0..plan.object_class {
        let pair = pair_at(i);
        let wrong = *INTERACTIVE_OBJECTS
            .iter()
            .find(|o| **o != pair.object_id)
            .expect("4 interactive classes");
        let hoi_id = vocab
            .hoi_of_pair(interactive_verbs(wrong)[0], wrong)
            .expect("interactive pairs exist");
        preds.push(ScenePrediction {
            human_box: jitter(&pair.human, rng),
            object_box: jitter(&pair.object, rng),
            hoi_id,
            score: fp_score(rng),
            verdict: Verdict::Fp,
            flags: flag("object_class"),
        });
    }
    for i in 0..plan.verb {
        // any pair always has a spare interactive verb by construction
        let pair = (0..draft.pairs.len())
            .map(|k| pair_at(i + k))
            .find(|pair| {
                interactive_verbs(pair.object_id)
                    .iter()
                    .any(|v| !pair.verbs.contains(v))
            })
            .expect("scene builders leave a spare verb on every pair");
        let spare = *interactive_verbs(pair.object_id)
            .iter()
            .find(|v| !pair.verbs.contains(v))
            .expect("spare verb checked");
        let hoi_id = vocab.hoi_of_pair(spare, pair.object_id).expect("vocabulary pair");
        preds.push(ScenePrediction {
            human_box: jitter(&pair.human, rng),
            object_box: jitter(&pair.object, rng),
            hoi_id,
            score: fp_score(rng),
            verdict: Verdict::Fp,
            flags: flag("verb"),
        });
    }
    if matches!(category, SynthCategory::C | SynthCategory::D) {
        for i in 0..plan.pairing {
            let a = pair_at(i);
            let b = pair_at(i + 1);
            preds.push(ScenePrediction {
                human_box: jitter(&a.human, rng),
                object_box: jitter(&b.object, rng),
                hoi_id: a.first_hoi,
                score: fp_score(rng),
                verdict: Verdict::Fp,
                flags: flag("pairing"),
            });
        }
    }
    for i in 0..plan.duplicate {
        let pair = pair_at(i);
        preds.push(ScenePrediction {
            human_box: jitter(&pair.human, rng),
            object_box: jitter(&pair.object, rng),
            hoi_id: pair.first_hoi,
            score: dup_score(rng),
            verdict: Verdict::Fp,
            flags: flag("duplicate"),
        });
    }
    preds
}

/// Generates the ground truth, predictions, and injection log for a spec.
///
/// Deterministic in the seed; every scene is verified to categorize as
/// requested before the dataset is returned.
pub fn generate(spec: &SynthSpec) -> Result<(Dataset, PredictionSet, InjectionLog)> {
    spec.validate()?;
    let vocab = synth_vocabulary();

    let mut seeder = SplitMix64::new(spec.seed);
    let mut scenes: Vec<(usize, SynthCategory, u64)> = Vec::with_capacity(spec.scene_count());
    for (category, count) in &spec.category_mix {
        for _ in 0..*count {
            let index = scenes.len();
            scenes.push((index, *category, seeder.next_u64()));
        }
    }

    struct SceneOut {
        image: GroundTruthImage,
        preds: Vec<ScenePrediction>,
    }

    let outputs: Vec<SceneOut> = scenes
        .par_iter()
        .map(|(index, category, scene_seed)| {
            let mut rng = SplitMix64::new(*scene_seed);
            let mut grid = SlotGrid::new(&spec.bounds, &mut rng);
            let persons = person_count_for(*category, spec.person_range, &mut rng);
            let draft = build_scene(*category, &vocab, &mut grid, persons, &mut rng);
            let preds =
                inject_scene(*category, &draft, &spec.injections, &vocab, &mut grid, &mut rng);
            SceneOut {
                image: GroundTruthImage {
                    image_id: format!("synth_{:06}", index + 1),
                    width: spec.bounds.width,
                    height: spec.bounds.height,
                    annotations: draft.annotations,
                },
                preds,
            }
        })
        .collect();

    // postcondition: the rule-based categorizer agrees with every request
    for ((_, category, _), out) in scenes.iter().zip(&outputs) {
        let (expected, expected_reason) = category.expected();
        let got = categorize_image(&out.image, &vocab, &CategorizeOptions::default())?;
        if got.category != expected || got.exclusion_reason != expected_reason {
            return Err(Error::contract(format!(
                "scene {} requested {} but categorized as {} ({:?})",
                out.image.image_id,
                category.name(),
                got.category,
                got.exclusion_reason
            )));
        }
    }

    let mut images = Vec::with_capacity(outputs.len());
    let mut predictions = Vec::new();
    let mut log = InjectionLog::default();
    for out in outputs {
        let image_id = out.image.image_id.clone();
        for p in out.preds {
            log.entries.push(InjectionEntry {
                prediction_index: predictions.len(),
                verdict: p.verdict,
                flags: p.flags,
            });
            predictions.push(Prediction {
                image_id: image_id.clone(),
                human_box: p.human_box,
                object_box: p.object_box,
                hoi_id: p.hoi_id,
                score: p.score,
            });
        }
        images.push(out.image);
    }

    let dataset = Dataset { vocabulary: vocab, images }.validated()?;
    let preds = PredictionSet { model_name: "synthetic".into(), predictions }
        .validated(&dataset.vocabulary)?;
    Ok((dataset, preds, log))
}
