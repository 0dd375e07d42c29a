//! Runs every check that applies to one model and collects the verdicts.

use serde::{Deserialize, Serialize};

use super::estimators::{
    covariance_check, increment_independence, pinned_diagnostic, sample_moments, IncrementTransform,
};
use crate::closed_form::{mean_power, BesselKernel};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::ode::{
    pinned_criterion_check, solve_general_ode, solve_second_moment_ode, MeanFieldCoefficients, OdeSettings,
    DEFAULT_PINNED_EPS, DEFAULT_TOL,
};
use crate::sde::{simulate, simulate_frozen_euler_with, FrozenEulerOptions, PathEnsemble, Scheme};
use crate::specfun::{bessel_i, PhiFn};

/// Uniform intervals of the validation grid before the near-horizon points are added.
pub const VALIDATION_INTERVALS: usize = 20;
/// Truncation levels (fractions of `T`) used by the pinned and decay checks.
pub const PINNED_EPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub n_paths: usize,
    /// Euler steps across `[0, T]`; unused by exact samplers.
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub z_threshold: f64,
    /// Shifts every target by `bias (1 + |target|)`; a negative control.
    pub inject_bias: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            z_threshold: DEFAULT_Z_THRESHOLD,
            inject_bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// The statement being checked.
    pub paper_ref: String,
    pub statistic: f64,
    pub target: f64,
    pub tolerance: f64,
    pub standard_error: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub family: String,
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub n_paths: usize,
    pub steps: usize,
    pub grid: TimeGrid,
    pub seed: u64,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model: ModelSummary,
    pub checks: Vec<CheckRecord>,
    pub ensemble_meta: EnsembleMeta,
}

impl ValidationReport {
    pub fn count(&self, verdict: Verdict) -> usize {
        self.checks.iter().filter(|c| c.verdict == verdict).count()
    }
}

/// `(statistic, target, tolerance, standard_error, note)`
type Measured = (f64, f64, f64, f64, Option<String>);

struct Suite {
    checks: Vec<CheckRecord>,
    bias: f64,
}

impl Suite {
    fn push(&mut self, name: String, statement: &str, result: Result<Measured>) {
        let record = match result {
            Ok((statistic, target, tolerance, se, note)) => {
                let target = target + self.bias * (1.0 + target.abs());
                let verdict = if (statistic - target).abs() <= tolerance {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
                CheckRecord {
                    name,
                    paper_ref: statement.to_string(),
                    statistic,
                    target,
                    tolerance,
                    standard_error: se,
                    verdict,
                    note,
                }
            }
            Err(e) => CheckRecord {
                name,
                paper_ref: statement.to_string(),
                statistic: 0.0,
                target: 0.0,
                tolerance: 0.0,
                standard_error: 0.0,
                verdict: Verdict::Inconclusive,
                note: Some(e.to_string()),
            },
        };
        self.checks.push(record);
    }
}

/// Validation grid: `k T/20` for `k < 20` plus `T - e T` for each pinned level.
pub fn validation_grid(horizon: f64) -> Result<TimeGrid> {
    let mut times: Vec<f64> = (0..VALIDATION_INTERVALS)
        .map(|k| k as f64 * horizon / VALIDATION_INTERVALS as f64)
        .collect();
    times.extend(PINNED_EPS.iter().map(|e| horizon - e * horizon));
    let eps_min = PINNED_EPS[PINNED_EPS.len() - 1] * horizon;
    TimeGrid::from_unsorted(times, horizon, eps_min)
}

fn has_exact_sampler(model: &ModelSpec) -> bool {
    match model {
        ModelSpec::PowerMean(_) | ModelSpec::ReferenceBrownianBridge { .. } => true,
        ModelSpec::PowerSecondMoment(p) => p.is_explicit(),
        ModelSpec::General(_) => false,
    }
}

/// Checks evaluated on the 10 points `k T/10`, `k = 1..9`, and `T - 10^-2 T`.
fn checkpoint_times(horizon: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = (1..10).map(|k| k as f64 * horizon / 10.0).collect();
    ts.push(horizon - PINNED_EPS[0] * horizon);
    ts
}

fn covariance_pairs(horizon: f64) -> Vec<(f64, f64)> {
    [(0.0, 0.5), (0.25, 0.75), (0.3, 0.6), (0.5, 0.9), (0.6, 1.0 - PINNED_EPS[0])]
        .iter()
        .map(|&(s, t)| (s * horizon, t * horizon))
        .collect()
}

fn index(e: &PathEnsemble, t: f64) -> Result<usize> {
    e.grid
        .index_of(t)
        .ok_or_else(|| Error::Usage(format!("time {t} is not on the validation grid")))
}

fn mc(ens: &Result<PathEnsemble>) -> Result<&PathEnsemble> {
    let e = ens.as_ref().map_err(Clone::clone)?;
    if e.n_paths() < 2 {
        return Err(Error::Degenerate(format!(
            "{} path(s); Monte Carlo checks need at least 2",
            e.n_paths()
        )));
    }
    Ok(e)
}

fn validation_substeps(steps: usize) -> usize {
    steps.div_ceil(VALIDATION_INTERVALS).max(1)
}

/// The ensemble `validate` draws: exact sampling on [`validation_grid`] where
/// available, otherwise frozen Euler with `ceil(steps/20)` substeps per interval.
pub fn validation_ensemble(model: &ModelSpec, budget: Budget) -> (Scheme, Result<PathEnsemble>) {
    let grid = match validation_grid(model.horizon()) {
        Ok(g) => g,
        Err(e) => return (Scheme::ExactGaussian, Err(e)),
    };
    if has_exact_sampler(model) {
        (
            Scheme::ExactGaussian,
            simulate(model, &grid, budget.n_paths, budget.seed, Scheme::ExactGaussian),
        )
    } else {
        let o = FrozenEulerOptions {
            substeps: validation_substeps(budget.steps),
            ..Default::default()
        };
        (
            Scheme::FrozenEuler,
            simulate_frozen_euler_with(model, &grid, budget.n_paths, budget.seed, o),
        )
    }
}

/// Pinning radius `0.1 √(x0² + T)`.
pub fn pinned_delta(model: &ModelSpec) -> f64 {
    let x0 = model.x0();
    0.1 * (x0 * x0 + model.horizon()).sqrt()
}

/// Simulates `model` within `budget` and runs the applicable checks. Failures
/// of individual checks are recorded as inconclusive; the report is always produced.
pub fn validate(model: &ModelSpec, budget: Budget, opts: ValidateOptions) -> Result<ValidationReport> {
    model.validate()?;
    let horizon = model.horizon();
    let grid = validation_grid(horizon)?;
    let z = opts.z_threshold;
    let exact = has_exact_sampler(model);
    let substeps = validation_substeps(budget.steps);
    let (scheme, ens) = validation_ensemble(model, budget);
    // Discretisation allowance for schemes with a time step.
    let step_allowance = if exact {
        0.0
    } else {
        horizon / (VALIDATION_INTERVALS * substeps) as f64
    };
    let allow = |target: f64| step_allowance * (1.0 + target.abs());

    let mut suite = Suite {
        checks: Vec::new(),
        bias: opts.inject_bias,
    };
    let coeffs = MeanFieldCoefficients::build(model, grid.times(), grid.truncation_eps(), &OdeSettings::default());
    let coeffs = coeffs.as_ref().map_err(Clone::clone);

    // First and second moments at the checkpoints.
    for &t in &checkpoint_times(horizon) {
        match model {
            ModelSpec::PowerMean(p) => suite.push(
                format!("mean@t={t}"),
                "E[X_t] = (a_α - α ln(T - t))^(-1/α)",
                (|| {
                    let e = mc(&ens)?;
                    let m = sample_moments(&e.column(index(e, t)?));
                    let target = mean_power(t, p)?;
                    Ok((m.mean, target, z * m.se_mean, m.se_mean, None))
                })(),
            ),
            _ => suite.push(
                format!("mean@t={t}"),
                "E[X_t] = X_0 exp(-∫_0^t μ(s)/(T - s) ds)",
                (|| {
                    let e = mc(&ens)?;
                    let m = sample_moments(&e.column(index(e, t)?));
                    let target = model.initial_value() * coeffs.clone()?.integrating_factor(t)?;
                    Ok((m.mean, target, z * m.se_mean + allow(target), m.se_mean, None))
                })(),
            ),
        }
        let statement = match model {
            ModelSpec::PowerSecondMoment(p) if p.is_explicit() => {
                "Var(Y_t) = √((T-t)/2) [I1(a)K1(z) - K1(a)I1(z)] / g(t), a = 2√(2T), z = 2√(2(T-t))"
            }
            ModelSpec::PowerSecondMoment(_) => "E[Y_t²] = f(t), f' = -2 f^(α+1)/(T-t) + 1",
            ModelSpec::General(_) => "E[ξ_t²] = η(t), η' = -2 μ(t, Φ1(η)) η/(T-t) + σ²(t, Φ2(η))",
            ModelSpec::PowerMean(_) => "E[X_t²] = E[X_t]² (1 + ∫_0^t (a_α - α ln(T-u))^(2/α) du)",
            ModelSpec::ReferenceBrownianBridge { .. } => "E[X_t²] = (x0 (T-t)/T)² + t (T-t)/T",
        };
        suite.push(
            format!("second_moment@t={t}"),
            statement,
            (|| {
                let e = mc(&ens)?;
                let m = sample_moments(&e.column(index(e, t)?));
                let target = coeffs.clone()?.second_moment(t)?;
                Ok((
                    m.second_moment,
                    target,
                    z * m.se_second_moment + allow(target),
                    m.se_second_moment,
                    None,
                ))
            })(),
        );
    }

    // Closed-form covariances.
    if exact {
        for (s, t) in covariance_pairs(horizon) {
            suite.push(
                format!("covariance@({s},{t})"),
                match model {
                    ModelSpec::PowerMean(_) => {
                        "Cov(X_s, X_t) = T α^(2/α) e^(1/(α x^α)) E[X_s] E[X_t] [γ(b, w_s) - γ(b, w_0)], b = (α+2)/α"
                    }
                    ModelSpec::ReferenceBrownianBridge { .. } => "Cov(X_s, X_t) = s (T - t)/T, s <= t",
                    _ => "Cov(Y_s, Y_t) = ((T - s)/2) g'(s) / √(g(s) g(t)), s <= t",
                },
                (|| {
                    let r = covariance_check(mc(&ens)?, &[(s, t)])?[0];
                    Ok((r.sample_cov, r.target_cov, z * r.se, r.se, None))
                })(),
            );
        }
    }

    // Independent increments of the martingale transforms.
    let transform = match model {
        ModelSpec::PowerMean(_) => Some((IncrementTransform::MPower, "M_t = (a_α - α ln(T-t))^(1/α) X_t has independent increments")),
        ModelSpec::PowerSecondMoment(p) if p.is_explicit() => {
            Some((IncrementTransform::NSecondMoment, "N_t = √g(t) Y_t has independent increments"))
        }
        _ => None,
    };
    if let Some((tr, statement)) = transform {
        suite.push(
            "independent_increments".into(),
            statement,
            (|| {
                let e = mc(&ens)?;
                let recs = increment_independence(e, tr)?;
                let worst = recs.iter().map(|r| r.rho.abs()).fold(0.0, f64::max);
                let se = 1.0 / (e.n_paths() as f64).sqrt();
                Ok((worst, 0.0, z * se, se, Some(format!("max |rho| over {} increment pairs", recs.len()))))
            })(),
        );
    }

    // Pinning: fraction near zero grows and the second moment decays as t -> T.
    let eps_abs: Vec<f64> = PINNED_EPS.iter().map(|e| e * horizon).collect();
    let delta = pinned_delta(model);
    suite.push(
        "pinned_fraction_monotone".into(),
        "P(lim_{t->T} X_t = 0) = 1: P(|X_{T-ε}| <= δ) non-decreasing as ε decreases",
        (|| {
            let d = pinned_diagnostic(mc(&ens)?, delta, &eps_abs)?;
            let drops = d.rows.windows(2).filter(|w| w[1].fraction < w[0].fraction).count();
            let fr: Vec<String> = d.rows.iter().map(|r| format!("{}", r.fraction)).collect();
            Ok((drops as f64, 0.0, 0.0, 0.0, Some(format!("delta = {delta}, fractions = [{}]", fr.join(", ")))))
        })(),
    );
    suite.push(
        "second_moment_decay".into(),
        "lim_{t->T} E[X_t²] = 0: empirical E[X_{T-ε}²] decreasing as ε decreases",
        (|| {
            let e = mc(&ens)?;
            let ms = eps_abs
                .iter()
                .map(|&eps| Ok(sample_moments(&e.column(index(e, horizon - eps)?)).second_moment))
                .collect::<Result<Vec<f64>>>()?;
            let rises = ms.windows(2).filter(|w| w[1] >= w[0]).count();
            let shown: Vec<String> = ms.iter().map(|m| format!("{m}")).collect();
            Ok((rises as f64, 0.0, 0.0, 0.0, Some(format!("E[X^2] = [{}]", shown.join(", ")))))
        })(),
    );
    for &eps in &eps_abs {
        let t = horizon - eps;
        suite.push(
            format!("terminal_second_moment@eps={eps}"),
            "E[X_{T-ε}²] follows the model second-moment curve",
            (|| {
                let e = mc(&ens)?;
                let m = sample_moments(&e.column(index(e, t)?));
                let target = coeffs.clone()?.second_moment(t)?;
                Ok((
                    m.second_moment,
                    target,
                    z * m.se_second_moment + allow(target),
                    m.se_second_moment,
                    None,
                ))
            })(),
        );
    }
    suite.push(
        "pinned_criterion".into(),
        "∫_0^{T-ε} μ(s)/(T-s) ds -> ∞ while ∫_0^{T-ε} σ(s)² ds stays bounded",
        (|| {
            let eps: Vec<f64> = DEFAULT_PINNED_EPS.iter().map(|e| e * horizon).collect();
            let r = pinned_criterion_check(model, &eps)?;
            let shown: Vec<String> = r.rows.iter().map(|row| format!("{}", row.drift_log_integral)).collect();
            Ok((
                if r.pinned { 1.0 } else { 0.0 },
                1.0,
                0.0,
                0.0,
                Some(format!("drift integrals = [{}]", shown.join(", "))),
            ))
        })(),
    );

    // Deterministic consistency of the moment curves.
    match model {
        ModelSpec::PowerSecondMoment(p) if p.is_explicit() => {
            suite.push(
                "bracket_saturation".into(),
                "⟨N⟩_T = I1(2√(2T))/4",
                (|| {
                    let k = BesselKernel::new(horizon)?;
                    let near = k.bracket(horizon - 1e-8 * horizon)?;
                    let limit = 0.25 * bessel_i(1, 2.0 * (2.0 * horizon).sqrt())?.value;
                    Ok((near, limit, 1e-4, 0.0, None))
                })(),
            );
            suite.push(
                "ode_vs_closed_form".into(),
                "v solves v' = -2 v²/(T - t) + 1, v(0) = 0",
                (|| {
                    let k = BesselKernel::new(horizon)?;
                    let sol = solve_second_moment_ode(1.0, 0.0, horizon, &grid, DEFAULT_TOL)?;
                    let mut worst: f64 = 0.0;
                    for (t, eta) in grid.times().iter().zip(&sol.eta) {
                        worst = worst.max((eta - k.variance(*t)?).abs());
                    }
                    Ok((worst, 0.0, 1e-8, 0.0, None))
                })(),
            );
        }
        ModelSpec::PowerSecondMoment(p) => {
            suite.push(
                "ode_tolerance_convergence".into(),
                "f' = -2 f^(α+1)/(T-t) + 1: halving tol moves f by < 10 tol",
                (|| {
                    let a = solve_second_moment_ode(p.alpha, p.x0, horizon, &grid, DEFAULT_TOL)?;
                    let b = solve_second_moment_ode(p.alpha, p.x0, horizon, &grid, 0.5 * DEFAULT_TOL)?;
                    let worst = a.eta.iter().zip(&b.eta).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    Ok((worst, 0.0, 10.0 * DEFAULT_TOL, 0.0, None))
                })(),
            );
            suite.push(
                "ode_bounds".into(),
                "0 <= f(t) <= x0 + T and f(t) + (T - t) non-increasing",
                (|| {
                    let s = solve_second_moment_ode(p.alpha, p.x0, horizon, &grid, DEFAULT_TOL)?;
                    let ts = grid.times();
                    let out_of_range = s.eta.iter().filter(|&&f| !(0.0..=p.x0 + horizon).contains(&f)).count();
                    let rises = (1..ts.len())
                        .filter(|&k| s.eta[k] + (horizon - ts[k]) > s.eta[k - 1] + (horizon - ts[k - 1]))
                        .count();
                    Ok(((out_of_range + rises) as f64, 0.0, 0.0, 0.0, None))
                })(),
            );
        }
        ModelSpec::General(p) => {
            suite.push(
                "ode_tolerance_convergence".into(),
                "η' = -2 μ(t, Φ1(η)) η/(T-t) + σ²(t, Φ2(η)): halving tol moves η by < 10 tol",
                (|| {
                    let order = OdeSettings::default().quad_order;
                    let a = solve_general_ode(p, &grid, DEFAULT_TOL, order)?;
                    let b = solve_general_ode(p, &grid, 0.5 * DEFAULT_TOL, order)?;
                    let worst = a.eta.iter().zip(&b.eta).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    Ok((worst, 0.0, 10.0 * DEFAULT_TOL, 0.0, None))
                })(),
            );
            for (slot, phi) in [(1u8, &p.phi1), (2u8, &p.phi2)] {
                for t in checkpoint_times(horizon).into_iter().step_by(2) {
                    self_consistency(&mut suite, model, &ens, &coeffs, slot, phi, t, z, &allow);
                }
            }
        }
        _ => {}
    }

    Ok(ValidationReport {
        model: ModelSummary {
            family: model.family().to_string(),
            spec: model.clone(),
        },
        checks: suite.checks,
        ensemble_meta: EnsembleMeta {
            n_paths: budget.n_paths,
            steps: budget.steps,
            grid,
            seed: budget.seed,
            scheme,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn self_consistency(
    suite: &mut Suite,
    model: &ModelSpec,
    ens: &Result<PathEnsemble>,
    coeffs: &Result<&MeanFieldCoefficients>,
    slot: u8,
    phi: &PhiFn,
    t: f64,
    z: f64,
    allow: &dyn Fn(f64) -> f64,
) {
    suite.push(
        format!("self_consistency_phi{slot}@t={t}"),
        "Φj(η(t)) = E[φj(ξ_t)]",
        (|| {
            if model.x0() != 0.0 {
                return Err(Error::Unsupported(
                    "the identity Φj(η) = E[φj(ξ)] needs a centred law, i.e. x0 = 0".into(),
                ));
            }
            let e = mc(ens)?;
            let vals: Vec<f64> = e.column(index(e, t)?).iter().map(|&x| phi.eval(x)).collect();
            let m = sample_moments(&vals);
            let c = coeffs.clone()?;
            let eta = c.second_moment(t)?;
            let target = crate::specfun::gaussian_expectation(phi, eta, OdeSettings::default().quad_order)?;
            Ok((m.mean, target, z * m.se_mean + allow(target), m.se_mean, None))
        })(),
    );
}
