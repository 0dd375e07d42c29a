//! Deterministic coefficient curves `μ(t)`, `σ(t)` of the linear SDE obtained
//! once the moment curve of a family is known.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use super::{solve_general_ode, solve_second_moment_ode, OdeSettings, OdeSolution};
use crate::closed_form::{drift_coeff_power, mean_power, power_variance_integral, BesselKernel};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{GeneralModelParams, ModelSpec, PowerMeanParams};
use crate::quadrature::integrate;
use crate::specfun::gaussian_expectation;

/// Default truncation levels for the pinned criterion, as fractions of `T`.
pub const DEFAULT_PINNED_EPS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

const COARSE_STEPS: usize = 512;
const POINTS_PER_DECADE: usize = 20;

/// `∫_lo^hi f(s)/(T - s) ds` evaluated in the variable `u = -ln(T - s)`.
fn log_time_integral<F>(mut f: F, horizon: f64, lo: f64, hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if hi <= lo {
        return Ok(0.0);
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let u_lo = -(horizon - lo).ln();
    let u_hi = -(horizon - hi).ln();
    let r = integrate(
        |u| {
            let s = (horizon - (-u).exp()).clamp(lo, hi);
            match f(s) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        },
        u_lo,
        u_hi,
        1e-13,
        1e-12,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r?.value)
}

/// `G(t) = exp(-∫_0^t μ(s)/(T - s) ds)` for a user-supplied drift rate.
pub fn drift_integral_g<F>(mu_of_t: F, horizon: f64, t: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(t.is_finite() && t >= 0.0 && t < horizon) {
        return Err(Error::domain("drift_integral_G", format!("t = {t} must lie in [0, T = {horizon})")));
    }
    Ok((-log_time_integral(mu_of_t, horizon, 0.0, t)?).exp())
}

enum Source {
    PowerMean(PowerMeanParams),
    Bessel(BesselKernel),
    Bridge { x0: f64 },
    SecondMomentOde { alpha: f64, sol: OdeSolution },
    GeneralOde { params: GeneralModelParams, sol: OdeSolution, quad_order: usize },
}

/// Drift rate `μ(t)`, noise `σ(t)`, second moment and integrating factor of one
/// model, from closed forms where available and from the moment ODE otherwise.
pub struct MeanFieldCoefficients {
    horizon: f64,
    source: Source,
    /// `-∫_0^{t_k} μ/(T - s) ds` at the ODE grid nodes.
    log_factor_nodes: Vec<f64>,
}

impl MeanFieldCoefficients {
    /// Builds the curves valid on `[0, T - truncation_eps]`; `extra` points are
    /// placed on the ODE grid so values there are solver nodes.
    pub fn build(model: &ModelSpec, extra: &[f64], truncation_eps: f64, settings: &OdeSettings) -> Result<Self> {
        model.validate()?;
        let horizon = model.horizon();
        let ode_grid = || {
            TimeGrid::graded(horizon, COARSE_STEPS, POINTS_PER_DECADE, truncation_eps)?.with_points(extra)
        };
        let source = match model {
            ModelSpec::PowerMean(p) => Source::PowerMean(*p),
            ModelSpec::PowerSecondMoment(p) if p.is_explicit() => Source::Bessel(BesselKernel::new(horizon)?),
            ModelSpec::ReferenceBrownianBridge { x0, .. } => Source::Bridge { x0: *x0 },
            ModelSpec::PowerSecondMoment(p) => {
                let grid = ode_grid()?;
                let sol = solve_second_moment_ode(p.alpha, p.x0, horizon, &grid, settings.tol)?;
                Source::SecondMomentOde { alpha: p.alpha, sol }
            }
            ModelSpec::General(p) => {
                let grid = ode_grid()?;
                let sol = solve_general_ode(p, &grid, settings.tol, settings.quad_order)?;
                Source::GeneralOde {
                    params: p.clone(),
                    sol,
                    quad_order: settings.quad_order,
                }
            }
        };
        let mut c = MeanFieldCoefficients {
            horizon,
            source,
            log_factor_nodes: Vec::new(),
        };
        if let Some(sol) = c.ode_solution() {
            let ts = sol.grid.times().to_vec();
            let mut acc = vec![0.0; ts.len()];
            for k in 1..ts.len() {
                acc[k] = acc[k - 1] - log_time_integral(|s| c.drift(s), horizon, ts[k - 1], ts[k])?;
            }
            c.log_factor_nodes = acc;
        }
        Ok(c)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn ode_solution(&self) -> Option<&OdeSolution> {
        match &self.source {
            Source::SecondMomentOde { sol, .. } | Source::GeneralOde { sol, .. } => Some(sol),
            _ => None,
        }
    }

    fn eta(&self, t: f64) -> Result<f64> {
        let sol = self.ode_solution().expect("ODE-backed source");
        Ok(sol.interpolate(t)?.max(0.0))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t.is_finite() && t >= 0.0 && t < self.horizon) {
            return Err(Error::domain(
                "MeanFieldCoefficients",
                format!("t = {t} must lie in [0, T = {})", self.horizon),
            ));
        }
        Ok(())
    }

    /// Drift rate `μ(t)` in `dX = -μ(t) X/(T - t) dt + σ(t) dW`.
    pub fn drift(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        match &self.source {
            Source::PowerMean(p) => drift_coeff_power(t, p),
            Source::Bessel(k) => k.variance(t),
            Source::Bridge { .. } => Ok(1.0),
            Source::SecondMomentOde { alpha, .. } => Ok(self.eta(t)?.powf(*alpha)),
            Source::GeneralOde {
                params, quad_order, ..
            } => {
                let m = gaussian_expectation(&params.phi1, self.eta(t)?, *quad_order)?;
                Ok(params.mu.eval(t, m))
            }
        }
    }

    /// Noise coefficient `σ(t)`.
    pub fn diffusion(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        match &self.source {
            Source::GeneralOde {
                params, quad_order, ..
            } => {
                let m = gaussian_expectation(&params.phi2, self.eta(t)?, *quad_order)?;
                Ok(params.sigma.eval(t, m))
            }
            _ => Ok(1.0),
        }
    }

    /// `E[X_t²]`.
    pub fn second_moment(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        match &self.source {
            Source::PowerMean(p) => {
                let m = mean_power(t, p)?;
                Ok(m * m * (1.0 + power_variance_integral(t, p)?))
            }
            Source::Bessel(k) => k.variance(t),
            Source::Bridge { x0 } => {
                let h = self.horizon;
                Ok((x0 * (h - t) / h).powi(2) + t * (h - t) / h)
            }
            _ => self.eta(t),
        }
    }

    /// `ln G(t) = -∫_0^t μ(s)/(T - s) ds`.
    pub fn log_integrating_factor(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let h = self.horizon;
        match &self.source {
            Source::PowerMean(p) => Ok((mean_power(t, p)? / p.x0).ln()),
            Source::Bessel(k) => Ok(0.5 * (k.g(0.0)? / k.g(t)?).ln()),
            Source::Bridge { .. } => Ok(((h - t) / h).ln()),
            _ => {
                let sol = self.ode_solution().expect("ODE-backed source");
                let ts = sol.grid.times();
                sol.interpolate(t)?;
                let k = ts.partition_point(|&x| x <= t) - 1;
                Ok(self.log_factor_nodes[k] - log_time_integral(|s| self.drift(s), h, ts[k], t)?)
            }
        }
    }

    pub fn integrating_factor(&self, t: f64) -> Result<f64> {
        Ok(self.log_integrating_factor(t)?.exp())
    }

    /// `∫_0^t σ(s)² ds`.
    pub fn noise_integral(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        match &self.source {
            Source::GeneralOde { .. } => {
                let sol = self.ode_solution().expect("ODE-backed source");
                sol.interpolate(t)?;
                let failure: RefCell<Option<Error>> = RefCell::new(None);
                let ts = sol.grid.times();
                let mut total = 0.0;
                for w in ts.windows(2) {
                    if w[0] >= t {
                        break;
                    }
                    let hi = w[1].min(t);
                    let r = integrate(
                        |s| match self.diffusion(s.clamp(w[0], hi)) {
                            Ok(v) => v * v,
                            Err(e) => {
                                failure.borrow_mut().get_or_insert(e);
                                f64::NAN
                            }
                        },
                        w[0],
                        hi,
                        1e-14,
                        1e-12,
                    );
                    if let Some(e) = failure.borrow_mut().take() {
                        return Err(e);
                    }
                    total += r?.value;
                }
                Ok(total)
            }
            _ => Ok(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinnedCriterionRow {
    pub eps: f64,
    /// `∫_0^{T-ε} μ(s)/(T - s) ds`; unbounded growth as `ε → 0` is required.
    pub drift_log_integral: f64,
    /// `∫_0^{T-ε} σ(s)² ds`; must stay bounded.
    pub noise_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedCriterion {
    pub rows: Vec<PinnedCriterionRow>,
    /// Strictly increasing drift integral whose per-step increments do not decay geometrically.
    pub drift_diverges: bool,
    /// Non-increasing noise increments that shrink at least geometrically.
    pub noise_converges: bool,
    pub pinned: bool,
}

/// Ratio separating geometrically shrinking increments from slowly shrinking ones.
const INCREMENT_RATIO: f64 = 0.5;

/// Evaluates the drift and noise integrals up to `T - ε` for each `ε` in
/// `eps_list` (absolute values, strictly decreasing).
pub fn pinned_criterion_check(model: &ModelSpec, eps_list: &[f64]) -> Result<PinnedCriterion> {
    model.validate()?;
    let horizon = model.horizon();
    if eps_list.is_empty() {
        return Err(Error::domain("pinned_criterion_check", "eps_list is empty"));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < horizon)) {
        return Err(Error::domain("pinned_criterion_check", "every eps must lie in (0, T)"));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::domain("pinned_criterion_check", "eps_list must be strictly decreasing"));
    }
    let eps_min = *eps_list.last().expect("non-empty");
    let ends: Vec<f64> = eps_list.iter().map(|e| horizon - e).collect();
    let coeffs = MeanFieldCoefficients::build(model, &ends, eps_min, &OdeSettings::default())?;
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let t = horizon - eps;
            let drift_log_integral = match model {
                ModelSpec::PowerMean(p) => {
                    let a = p.a_alpha();
                    ((a - p.alpha * eps.ln()).ln() - (a - p.alpha * horizon.ln()).ln()) / p.alpha
                }
                _ => -coeffs.log_integrating_factor(t)?,
            };
            Ok(PinnedCriterionRow {
                eps,
                drift_log_integral,
                noise_integral: coeffs.noise_integral(t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let drift_inc: Vec<f64> = rows.windows(2).map(|w| w[1].drift_log_integral - w[0].drift_log_integral).collect();
    let noise_inc: Vec<f64> = rows.windows(2).map(|w| w[1].noise_integral - w[0].noise_integral).collect();
    let drift_diverges = drift_inc.iter().all(|&d| d > 0.0)
        && drift_inc.windows(2).all(|w| w[1] >= INCREMENT_RATIO * w[0]);
    let noise_converges = rows.iter().all(|r| r.noise_integral.is_finite())
        && noise_inc
            .windows(2)
            .all(|w| w[1].abs() <= INCREMENT_RATIO * w[0].abs() + 1e-15 * horizon);
    Ok(PinnedCriterion {
        rows,
        drift_diverges,
        noise_converges,
        pinned: drift_diverges && noise_converges,
    })
}
