//! ε sweeps, growth classification and the hypothesis checks built on them.

pub mod classify;
pub mod conditions;
pub mod fit;
pub mod moderateness;
pub mod pipeline;
pub mod sweep;

pub use classify::{classify_values, Classification, ClassifyConfig, Requirement, SweepSeries};
pub use conditions::{verify_system_conditions, verify_wave_conditions, Case, ConditionReport, HypothesisVerdict};
pub use fit::{fit_exponent, ExponentFit};
pub use moderateness::{solution_moderateness, ModeratenessConfig, ModeratenessReport};
pub use pipeline::{geroch_traschen_pipeline, PipelineReport, RawMetric};
pub use sweep::{classify_net, SweepConfig, SweepReport};
