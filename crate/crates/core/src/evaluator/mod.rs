//! Joint goal accuracy, fine-grained bucketed scoring, low-resource sampling
//! and report emission.

mod buckets;
mod jga;
mod normalize;
mod report;
mod sample;

pub use buckets::{bucketize, Axis, BucketPreset, BucketRange, BucketSpec, TurnKey};
pub use jga::{compute_jga, fine_grained_report, load_predictions, BucketScore, EvalReport, PredictionRecord};
pub(crate) use normalize::Normalizer;
pub use normalize::{normalize_value, similarity, NormalizationPolicy, DONTCARE_VALUE, NONE_VALUE};
pub use report::{emit_report, read_report, render_report, ReportFormat};
pub use sample::{low_resource_sample, sample_size};
