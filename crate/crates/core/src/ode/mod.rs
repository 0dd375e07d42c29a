//! Moment equations of the second-moment and general families.
//!
//! Second-moment family: `f' = -2 f^{α+1} / (T - t) + 1`, `f(0) = x0`.
//!
//! General family: `η' = -2 μ(t, Φ1(η)) η / (T - t) + σ²(t, Φ2(η))`, `η(0) = x0`,
//! where `Φj(r) = E[φj(W_r)]` for a Brownian motion `W`.
//!
//! Both right-hand sides carry a `1/(T - t)` factor, so steps are clamped to a
//! tenth of the remaining distance to the horizon and grids stop at `T - ε`.

mod coefficients;
mod dopri;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::GeneralModelParams;
use crate::specfun::{gaussian_expectation, PhiFn, DEFAULT_HERMITE_ORDER};

pub use coefficients::{
    drift_integral_g, pinned_criterion_check, MeanFieldCoefficients, PinnedCriterion, PinnedCriterionRow,
    DEFAULT_PINNED_EPS,
};
pub use dopri::{StepStats, HORIZON_STEP_FRACTION};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeSettings {
    pub tol: f64,
    pub quad_order: usize,
}

impl Default for OdeSettings {
    fn default() -> Self {
        OdeSettings {
            tol: DEFAULT_TOL,
            quad_order: DEFAULT_HERMITE_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSolution {
    pub grid: TimeGrid,
    pub eta: Vec<f64>,
    /// Right-hand side at each grid point, used for Hermite interpolation.
    pub slope: Vec<f64>,
    pub step_stats: StepStats,
    /// Linear extrapolation to `T` from `T - 2ε` and `T - ε`, floored at 0.
    pub terminal_estimate: f64,
    pub tol: f64,
}

impl OdeSolution {
    /// Cubic Hermite interpolation between grid points.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let ts = self.grid.times();
        let first = ts[0];
        let last = self.grid.last();
        if !(t >= first && t <= last) {
            return Err(Error::domain(
                "OdeSolution::interpolate",
                format!("t = {t} outside solved range [{first}, {last}]"),
            ));
        }
        let i = ts.partition_point(|&x| x <= t);
        if i == 0 {
            return Ok(self.eta[0]);
        }
        if i == ts.len() {
            return Ok(self.eta[ts.len() - 1]);
        }
        let (t0, t1) = (ts[i - 1], ts[i]);
        if t == t0 {
            return Ok(self.eta[i - 1]);
        }
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * self.eta[i - 1] + h10 * h * self.slope[i - 1] + h01 * self.eta[i] + h11 * h * self.slope[i])
    }
}

fn check_settings(func: &'static str, tol: f64, horizon: f64, grid: &TimeGrid) -> Result<()> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::domain(func, format!("tol = {tol} must be > 0")));
    }
    if (grid.horizon() - horizon).abs() > 1e-12 * horizon {
        return Err(Error::domain(
            func,
            format!("grid horizon {} differs from T = {horizon}", grid.horizon()),
        ));
    }
    Ok(())
}

/// Runs the integrator through the grid and the two extrapolation points.
fn solve_on_grid<F>(rhs: F, x0: f64, grid: &TimeGrid, tol: f64) -> Result<OdeSolution>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let horizon = grid.horizon();
    let eps = grid.truncation_eps();
    let near = [horizon - 2.0 * eps, horizon - eps];
    let stops = grid.with_points(&near)?;
    let tr = dopri::integrate(rhs, x0, horizon, stops.times(), tol)?;
    let pick = |t: f64| tr.values[stops.index_of(t).expect("stop is on the merged grid")];
    let idx: Vec<usize> = grid
        .times()
        .iter()
        .map(|&t| stops.index_of(t).expect("grid point is on the merged grid"))
        .collect();
    let terminal_estimate = (2.0 * pick(near[1]) - pick(near[0])).max(0.0);
    Ok(OdeSolution {
        grid: grid.clone(),
        eta: idx.iter().map(|&i| tr.values[i]).collect(),
        slope: idx.iter().map(|&i| tr.slopes[i]).collect(),
        step_stats: tr.stats,
        terminal_estimate,
        tol,
    })
}

/// Solves `f' = -2 f^{α+1}/(T - t) + 1`, `f(0) = x0` on `grid`.
pub fn solve_second_moment_ode(alpha: f64, x0: f64, horizon: f64, grid: &TimeGrid, tol: f64) -> Result<OdeSolution> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::domain("solve_second_moment_ode", format!("alpha = {alpha} must be > 0")));
    }
    if !(x0.is_finite() && x0 >= 0.0) {
        return Err(Error::domain("solve_second_moment_ode", format!("x0 = {x0} must be >= 0")));
    }
    check_settings("solve_second_moment_ode", tol, horizon, grid)?;
    let rhs = |t: f64, f: f64| Ok(1.0 - 2.0 * f.max(0.0).powf(alpha + 1.0) / (horizon - t));
    solve_on_grid(rhs, x0, grid, tol)
}

/// Per-solve memo of `Φj(η)` keyed on `η` rounded to `1e-12`.
pub(crate) struct TransformCache<'a> {
    phis: [&'a PhiFn; 2],
    order: usize,
    memo: HashMap<(u8, i64), f64>,
}

impl<'a> TransformCache<'a> {
    pub(crate) fn new(phi1: &'a PhiFn, phi2: &'a PhiFn, order: usize) -> Self {
        TransformCache {
            phis: [phi1, phi2],
            order,
            memo: HashMap::new(),
        }
    }

    pub(crate) fn get(&mut self, slot: u8, eta: f64) -> Result<f64> {
        let key = (slot, (eta * 1e12).round() as i64);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = gaussian_expectation(self.phis[slot as usize], eta, self.order)?;
        self.memo.insert(key, v);
        Ok(v)
    }
}

/// Checks `μ > 0` (`μ ≥ 0` at `t = 0`), `σ ≠ 0` and `σ² ≤ h(t)` at one evaluation point.
pub(crate) fn check_hypotheses(p: &GeneralModelParams, t: f64, mu: f64, sigma: f64) -> Result<()> {
    let mu_ok = if t == 0.0 { mu >= 0.0 } else { mu > 0.0 };
    if !(mu_ok && mu.is_finite()) {
        return Err(Error::HypothesisViolation {
            t,
            detail: format!("drift coefficient mu = {mu} must be positive"),
        });
    }
    if !(sigma != 0.0 && sigma.is_finite()) {
        return Err(Error::HypothesisViolation {
            t,
            detail: format!("diffusion coefficient sigma = {sigma} must be non-zero"),
        });
    }
    let h = p.sigma_envelope.eval(t);
    if sigma * sigma > h * (1.0 + 1e-12) {
        return Err(Error::HypothesisViolation {
            t,
            detail: format!("sigma^2 = {} exceeds the envelope h(t) = {h}", sigma * sigma),
        });
    }
    Ok(())
}

/// Solves the general-family moment equation on `grid`; every right-hand-side
/// evaluation checks the coefficient hypotheses.
pub fn solve_general_ode(params: &GeneralModelParams, grid: &TimeGrid, tol: f64, quad_order: usize) -> Result<OdeSolution> {
    params.validate()?;
    check_settings("solve_general_ode", tol, params.horizon, grid)?;
    let horizon = params.horizon;
    let mut cache = TransformCache::new(&params.phi1, &params.phi2, quad_order);
    let rhs = |t: f64, eta: f64| {
        let e = eta.max(0.0);
        let mu = params.mu.eval(t, cache.get(0, e)?);
        let sigma = params.sigma.eval(t, cache.get(1, e)?);
        check_hypotheses(params, t, mu, sigma)?;
        Ok(-2.0 * mu * e / (horizon - t) + sigma * sigma)
    };
    solve_on_grid(rhs, params.x0, grid, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoeffFn;

    #[test]
    fn initial_condition_is_kept() {
        let grid = TimeGrid::uniform(1.0, 10, 1e-6).unwrap();
        let s = solve_second_moment_ode(2.0, 0.5, 1.0, &grid, 1e-10).unwrap();
        assert_eq!(s.eta[0], 0.5);
        assert_eq!(s.eta.len(), grid.len());
    }

    #[test]
    fn constant_coefficients_give_bridge_variance() {
        let mut p = GeneralModelParams::example(0.0, 1.0);
        p.mu = CoeffFn::constant(1.0);
        p.sigma = CoeffFn::constant(1.0);
        let grid = TimeGrid::uniform(1.0, 20, 1e-6).unwrap();
        let s = solve_general_ode(&p, &grid, 1e-11, 32).unwrap();
        for (t, e) in grid.times().iter().zip(&s.eta) {
            assert!((e - t * (1.0 - t)).abs() < 1e-9, "t={t}: {e}");
        }
    }

    #[test]
    fn non_positive_drift_violates_hypothesis() {
        let mut p = GeneralModelParams::example(0.0, 1.0);
        p.mu = CoeffFn::constant(-1.0);
        let grid = TimeGrid::uniform(1.0, 4, 1e-6).unwrap();
        assert!(matches!(
            solve_general_ode(&p, &grid, 1e-8, 16),
            Err(Error::HypothesisViolation { .. })
        ));
    }

    #[test]
    fn envelope_is_enforced() {
        let mut p = GeneralModelParams::example(0.0, 1.0);
        p.sigma = CoeffFn::constant(2.0);
        let grid = TimeGrid::uniform(1.0, 4, 1e-6).unwrap();
        assert!(matches!(
            solve_general_ode(&p, &grid, 1e-8, 16),
            Err(Error::HypothesisViolation { .. })
        ));
    }

    #[test]
    fn interpolation_hits_nodes_and_rejects_outside() {
        let grid = TimeGrid::uniform(1.0, 8, 1e-3).unwrap();
        let s = solve_second_moment_ode(1.0, 0.0, 1.0, &grid, 1e-10).unwrap();
        assert_eq!(s.interpolate(grid.times()[3]).unwrap(), s.eta[3]);
        assert!(s.interpolate(0.9995).is_err());
        let mid = s.interpolate(0.3).unwrap();
        assert!(mid > s.eta[2] && mid < s.eta[3]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let grid = TimeGrid::uniform(1.0, 4, 1e-6).unwrap();
        assert!(solve_second_moment_ode(0.0, 0.0, 1.0, &grid, 1e-8).is_err());
        assert!(solve_second_moment_ode(1.0, -1.0, 1.0, &grid, 1e-8).is_err());
        assert!(solve_second_moment_ode(1.0, 0.0, 1.0, &grid, 0.0).is_err());
        assert!(solve_second_moment_ode(1.0, 0.0, 2.0, &grid, 1e-8).is_err());
    }
}
