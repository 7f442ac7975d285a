//! Chain-of-thought explanation tooling for schema-guided dialogue state
//! tracking: corpus ingestion, per-slot reasoning chains, prompt/target
//! construction, explanation refinement and joint-goal-accuracy evaluation.

pub mod builder;
pub mod chains;
pub mod corpus;
mod error;
pub mod evaluator;
pub mod refiner;

pub use builder::{
    build_coarse_explanation, build_dataset, build_question, parse_generation, render_prompt, render_target,
    BuildOptions, CoTExample, ExampleMeta, ExplanationKind, PromptTemplate, QuestionOverrides,
};
pub use chains::{extract_chain, reasoning_steps, step_histogram, SlotChain, StepHistogram};
pub use corpus::{
    ingest_legacy, load_corpus, load_schema, save_corpus, Corpus, Dialogue, LegacyStyle, Schema, SlotSchema, Split,
    TurnPair,
};
pub use error::{Error, Result};
pub use evaluator::{
    bucketize, compute_jga, emit_report, fine_grained_report, low_resource_sample, normalize_value, Axis, BucketPreset,
    BucketSpec, EvalReport, NormalizationPolicy, PredictionRecord, ReportFormat,
};
pub use refiner::{RefineConfig, RefineResult, RefineSource, Refiner};

/// Canonical schema files bundled with the crate.
pub mod resources {
    /// WOZ 2.0: one restaurant domain, three slots.
    pub const WOZ2_SCHEMA: &str = include_str!("../resources/schemas/woz2.json");
    /// M2M-R+M: restaurant and movie domains, fourteen slots.
    pub const M2M_SCHEMA: &str = include_str!("../resources/schemas/m2m.json");
}
