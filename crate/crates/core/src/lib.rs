//! Diagnostics toolkit for human-object interaction (HOI) detection.
//!
//! Categorizes scenes by their human-object-interaction configuration,
//! evaluates predictions with pair-matching AP/mAP, decomposes false
//! positives into six interpretable error types, and reports
//! class-frequency and object-conditioned verb-bias statistics.

pub mod bias;
pub mod category;
pub mod convert;
pub mod decompose;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod instance;
pub mod model;
pub mod synth;
pub mod vocab;

pub use bias::{
    build_frequencies, object_bias_table, spearman_rho, top_k_table, FrequencyOptions,
    FrequencyTable, ObjectBiasTable,
};
pub use category::{
    categorize_dataset, categorize_graph, categorize_image, category_statistics, consensus,
    filter_image, merge_consensus, parse_label_file, AssignmentSource, CategorizeOptions,
    CategoryAssignment, CategoryStats, ExclusionReason, SceneCategory,
};
pub use decompose::{decompose_fp, decompose_predictions, sweep, ErrorFlags, ErrorSweep, FLAG_NAMES};
pub use convert::{convert_external, convert_external_dataset, ExternalFormat};
pub use error::{Error, Result};
pub use eval::{
    assignment_map, average_precision, evaluate, match_class, match_dataset, ClassAp, EvalReport,
    EvalSettings, GtView, MatchOutcome, Verdict,
};
pub use geometry::{iou, BoundingBox};
pub use instance::{
    interaction_relation, resolve_instances, InteractionRelation, ObjectInstance, PersonInstance,
    ResolveOptions, SceneGraph, DEFAULT_MERGE_IOU,
};
pub use model::{
    check_prediction_images, parse_ground_truth, parse_predictions, Dataset, GroundTruthImage,
    HoiAnnotation, Prediction, PredictionSet,
};
pub use synth::{
    generate, synth_vocabulary, GeometryBounds, InjectionLog, InjectionPlan, SplitMix64,
    SynthCategory, SynthSpec,
};
pub use vocab::{HoiClass, ObjectCategory, Verb, Vocabulary};
