//! Special-function kernel.
//!
//! Modified Bessel functions `I0, I1, K0, K1`, the incomplete gamma pair
//! `γ(b, x)`, `Γ(b, x)`, and Gauss–Hermite expectations `E[φ(W_r)]` with
//! `W_r ~ N(0, r)`. Every routine is a pure function and safe to call from
//! any number of threads.

mod bessel;
mod gamma;
mod hermite;
pub(crate) mod phi;

use serde::{Deserialize, Serialize};

pub use bessel::{bessel_i, bessel_k};
pub use gamma::{gamma, ln_gamma, lower_inc_gamma, upper_inc_gamma};
pub use hermite::{
    gauss_hermite_rule, gaussian_expectation, gaussian_expectation_est, GaussHermiteRule,
    DEFAULT_HERMITE_ORDER,
};
pub use phi::PhiFn;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Which evaluation branch produced a [`SpecFunResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Series,
    Asymptotic,
    Recurrence,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecFunResult {
    pub value: f64,
    /// Finite, non-negative estimate of the absolute error in `value`.
    pub est_abs_error: f64,
    pub regime: Regime,
}

impl SpecFunResult {
    pub(crate) fn new(value: f64, est_abs_error: f64, regime: Regime) -> Self {
        debug_assert!(est_abs_error.is_finite() && est_abs_error >= 0.0);
        SpecFunResult {
            value,
            est_abs_error,
            regime,
        }
    }
}
