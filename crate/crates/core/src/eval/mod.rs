//! Evaluation protocols: regression metrics, cross-validation, ablations,
//! and latency benchmarks.

mod bench;
mod cv;
mod metrics;
mod pipeline;
mod report;

#[cfg(test)]
mod tests;

pub use bench::{timing_benchmark, TimingReport, TimingStats};
pub use cv::{
    fold_boundaries, intra_subject_cv, intra_subject_cv_with, loso_cv, offset_sweep_eval,
    training_duration_sweep, CvOutcome, EvalConfig, FoldResult, ModelChoice, OffsetPoint,
    Regressor, RegressorFactory, SweepPoint,
};
pub use metrics::{absolute_error, nmse, pca_explained_variance, AbsError, Nmse, PcaSummary};
pub use pipeline::{
    apply_features, fit_features_pooled, fit_features_single, prepare_session, FeatureKind,
    FittedFeatures, PreparedSession,
};
pub use report::{pca_csv, sweep_csv, timing_csv, EvalReport};
