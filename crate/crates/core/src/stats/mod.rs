//! Monte Carlo estimators and the validation suite.
//!
//! Almost-sure statements are checked through fixed statistical renderings:
//! the fraction of paths within `δ` of zero at `T - ε` must not drop as `ε`
//! shrinks, and the empirical second moment at `T - ε` must decrease.

mod estimators;
mod validate;

pub use estimators::{
    checkpoint_indices, covariance_check, ensemble_moments, increment_correlations, increment_independence,
    pinned_diagnostic, target_covariance, transform_weights, CorrelationRecord, CovarianceRecord,
    IncrementTransform, Moments, PinnedDiagnostic, PinnedRow,
};
pub use validate::{
    pinned_delta, validate, validation_ensemble, validation_grid, Budget, CheckRecord, EnsembleMeta, ModelSummary, ValidateOptions, ValidationReport,
    Verdict, DEFAULT_Z_THRESHOLD, PINNED_EPS, VALIDATION_INTERVALS,
};
