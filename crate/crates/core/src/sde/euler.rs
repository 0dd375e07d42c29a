//! Time-stepping schemes for `dX = -μ X/(T - t) dt + σ dW`.
//!
//! Both schemes refine every output interval into `substeps` equal steps. A
//! step uses plain Euler–Maruyama unless `k = μ Δt/(T - t)` exceeds the
//! threshold, in which case the linear equation is solved exactly over the
//! step with `μ, σ` frozen at its left end:
//!
//! ```text
//! X' = (L/U)^μ X + σ √(L (1 - (L/U)^{2μ-1}) / (2μ - 1)) Z,   U = T - t, L = T - t - Δt
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{check_simulation_inputs, derive_path_stream, PathEnsemble, PathRng, Scheme, SeedSchedule};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;
use crate::ode::{check_hypotheses, MeanFieldCoefficients, OdeSettings};
use crate::specfun::PhiFn;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenEulerOptions {
    /// Steps per output interval.
    pub substeps: usize,
    /// Drift factor above which the exact linear update replaces the Euler
    /// step; `None` forces Euler and reports `k > 1` as a stability error.
    pub exact_threshold: Option<f64>,
}

impl Default for FrozenEulerOptions {
    fn default() -> Self {
        FrozenEulerOptions {
            substeps: 1,
            exact_threshold: Some(0.5),
        }
    }
}

/// `X_{n+1} = decay X_n + noise_sd Z`.
#[derive(Debug, Clone, Copy)]
struct StepMap {
    decay: f64,
    noise_sd: f64,
}

fn step_map(t0: f64, t1: f64, horizon: f64, mu: f64, sigma: f64, threshold: Option<f64>) -> Result<StepMap> {
    let upper = horizon - t0;
    let lower = horizon - t1;
    let dt = t1 - t0;
    let k = mu * dt / upper;
    let exact = match threshold {
        Some(th) => k > th,
        None if k > 1.0 => return Err(Error::Stability { t: t0, factor: k }),
        None => false,
    };
    if !exact {
        return Ok(StepMap {
            decay: 1.0 - k,
            noise_sd: sigma.abs() * dt.sqrt(),
        });
    }
    let log_ratio = (lower / upper).ln();
    let c = 2.0 * mu - 1.0;
    let shape = if c == 0.0 { -log_ratio } else { -(c * log_ratio).exp_m1() / c };
    Ok(StepMap {
        decay: (mu * log_ratio).exp(),
        noise_sd: sigma.abs() * (lower * shape).max(0.0).sqrt(),
    })
}

/// Output grid refined into `substeps` equal pieces per interval; returns the
/// fine times and the fine index of every output point.
fn refine(grid: &TimeGrid, substeps: usize) -> (Vec<f64>, Vec<usize>) {
    let ts = grid.times();
    let mut fine = vec![ts[0]];
    let mut marks = vec![0];
    for w in ts.windows(2) {
        for s in 1..substeps {
            fine.push(w[0] + (w[1] - w[0]) * s as f64 / substeps as f64);
        }
        fine.push(w[1]);
        marks.push(fine.len() - 1);
    }
    (fine, marks)
}

pub fn simulate_frozen_euler(model: &ModelSpec, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    simulate_frozen_euler_with(model, grid, n_paths, seed, FrozenEulerOptions::default())
}

/// Integrates the linear SDE whose coefficients are the model's deterministic
/// curves `μ(t)`, `σ(t)` (closed form or moment ODE).
pub fn simulate_frozen_euler_with(
    model: &ModelSpec,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    opts: FrozenEulerOptions,
) -> Result<PathEnsemble> {
    model.validate()?;
    let horizon = model.horizon();
    check_simulation_inputs("simulate_frozen_euler", horizon, grid, n_paths)?;
    if opts.substeps == 0 {
        return Err(Error::domain("simulate_frozen_euler", "substeps must be >= 1"));
    }
    let (fine, marks) = refine(grid, opts.substeps);
    let coeffs = MeanFieldCoefficients::build(model, &fine, grid.truncation_eps(), &OdeSettings::default())?;
    let maps = fine
        .windows(2)
        .map(|w| step_map(w[0], w[1], horizon, coeffs.drift(w[0])?, coeffs.diffusion(w[0])?, opts.exact_threshold))
        .collect::<Result<Vec<_>>>()?;
    let x0 = model.initial_value();
    let n_times = grid.len();
    let mut paths = vec![0.0; n_paths * n_times];
    paths.par_chunks_mut(n_times).enumerate().for_each(|(i, row)| {
        let mut rng = derive_path_stream(seed, i as u64);
        let mut x = x0;
        row[0] = x;
        let mut out = 1;
        for (n, m) in maps.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            x = m.decay * x + m.noise_sd * z;
            if out < n_times && marks[out] == n + 1 {
                row[out] = x;
                out += 1;
            }
        }
    });
    PathEnsemble::from_parts(
        grid.clone(),
        model.clone(),
        SeedSchedule::new(seed),
        Scheme::FrozenEuler,
        n_paths,
        paths,
    )
}

/// Floor applied to the empirical mean before raising it to the power `α`.
pub const PARTICLE_MEAN_FLOOR: f64 = 1e-12;

fn empirical<F: Fn(f64) -> f64>(xs: &[f64], f: F) -> f64 {
    xs.iter().map(|&x| f(x)).sum::<f64>() / xs.len() as f64
}

/// Drift rate and noise of the particle system at one step, from ensemble averages.
fn particle_coefficients(model: &ModelSpec, t: f64, step: usize, xs: &[f64]) -> Result<(f64, f64)> {
    match model {
        ModelSpec::PowerMean(p) => {
            let m = empirical(xs, |x| x);
            if m <= 0.0 && p.alpha.fract() != 0.0 {
                return Err(Error::ParticleCollapse {
                    step,
                    mean: m,
                    alpha: p.alpha,
                });
            }
            Ok((m.max(PARTICLE_MEAN_FLOOR).powf(p.alpha), 1.0))
        }
        ModelSpec::PowerSecondMoment(p) => Ok((empirical(xs, |x| x * x).powf(p.alpha), 1.0)),
        ModelSpec::General(p) => {
            let m1 = empirical(xs, |x| PhiFn::eval(&p.phi1, x));
            let m2 = empirical(xs, |x| PhiFn::eval(&p.phi2, x));
            let mu = p.mu.eval(t, m1);
            let sigma = p.sigma.eval(t, m2);
            check_hypotheses(p, t, mu, sigma)?;
            Ok((mu, sigma))
        }
        ModelSpec::ReferenceBrownianBridge { .. } => Ok((1.0, 1.0)),
    }
}

/// Interacting-particle scheme: all particles advance together and every
/// expectation in the coefficients is the current ensemble average.
pub fn simulate_particle_euler(model: &ModelSpec, grid: &TimeGrid, n_particles: usize, seed: u64) -> Result<PathEnsemble> {
    simulate_particle_euler_with(model, grid, n_particles, seed, FrozenEulerOptions::default())
}

pub fn simulate_particle_euler_with(
    model: &ModelSpec,
    grid: &TimeGrid,
    n_particles: usize,
    seed: u64,
    opts: FrozenEulerOptions,
) -> Result<PathEnsemble> {
    model.validate()?;
    let horizon = model.horizon();
    check_simulation_inputs("simulate_particle_euler", horizon, grid, n_particles)?;
    if n_particles < 2 {
        return Err(Error::domain(
            "simulate_particle_euler",
            format!("n_particles = {n_particles}; an interacting system needs at least 2 particles"),
        ));
    }
    if opts.substeps == 0 {
        return Err(Error::domain("simulate_particle_euler", "substeps must be >= 1"));
    }
    let (fine, marks) = refine(grid, opts.substeps);
    let n_times = grid.len();
    let mut state = vec![model.initial_value(); n_particles];
    let mut rngs: Vec<PathRng> = (0..n_particles).map(|i| derive_path_stream(seed, i as u64)).collect();
    let mut paths = vec![0.0; n_particles * n_times];
    let record = |paths: &mut [f64], state: &[f64], j: usize| {
        for (i, &x) in state.iter().enumerate() {
            paths[i * n_times + j] = x;
        }
    };
    record(&mut paths, &state, 0);
    let mut out = 1;
    for (n, w) in fine.windows(2).enumerate() {
        let (mu, sigma) = particle_coefficients(model, w[0], n, &state)?;
        let m = step_map(w[0], w[1], horizon, mu, sigma, opts.exact_threshold)?;
        state.par_iter_mut().zip(rngs.par_iter_mut()).for_each(|(x, rng)| {
            let z: f64 = rng.sample(StandardNormal);
            *x = m.decay * *x + m.noise_sd * z;
        });
        if out < n_times && marks[out] == n + 1 {
            record(&mut paths, &state, out);
            out += 1;
        }
    }
    PathEnsemble::from_parts(
        grid.clone(),
        model.clone(),
        SeedSchedule::new(seed),
        Scheme::ParticleEuler,
        n_particles,
        paths,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PowerMeanParams;

    #[test]
    fn exact_step_matches_bridge_transition() {
        // Brownian bridge: decay (T-t1)/(T-t0), variance (T-t1)(t1-t0)/(T-t0).
        let m = step_map(0.2, 0.7, 1.0, 1.0, 1.0, Some(0.0)).unwrap();
        assert!((m.decay - 0.3 / 0.8).abs() < 1e-15);
        assert!((m.noise_sd.powi(2) - 0.3 * 0.5 / 0.8).abs() < 1e-15);
    }

    #[test]
    fn half_rate_uses_logarithmic_limit() {
        let m = step_map(0.0, 0.5, 1.0, 0.5, 2.0, Some(0.0)).unwrap();
        assert!((m.noise_sd.powi(2) - 4.0 * 0.5 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn euler_without_threshold_reports_instability() {
        assert!(matches!(
            step_map(0.9, 0.99, 1.0, 2.0, 1.0, None),
            Err(Error::Stability { .. })
        ));
        let m = step_map(0.0, 0.1, 1.0, 1.0, 1.0, None).unwrap();
        assert!((m.decay - 0.9).abs() < 1e-15);
    }

    #[test]
    fn refine_keeps_output_points() {
        let g = TimeGrid::new(vec![0.0, 0.5, 0.75], 1.0, 0.1).unwrap();
        let (fine, marks) = refine(&g, 4);
        assert_eq!(fine.len(), 9);
        assert_eq!(marks, vec![0, 4, 8]);
        assert_eq!(fine[8], 0.75);
    }

    #[test]
    fn particle_scheme_needs_two_particles() {
        let m = ModelSpec::PowerMean(PowerMeanParams::new(1.0, 1.0, 1.0).unwrap());
        let g = TimeGrid::uniform(1.0, 4, 1e-3).unwrap();
        assert!(simulate_particle_euler(&m, &g, 1, 0).is_err());
        assert!(simulate_particle_euler(&m, &g, 2, 0).is_ok());
    }

    #[test]
    fn particle_collapse_is_reported() {
        let m = ModelSpec::PowerMean(PowerMeanParams::new(0.5, 1e-3, 1.0).unwrap());
        let g = TimeGrid::uniform(1.0, 50, 1e-3).unwrap();
        let mut seen_collapse = false;
        for seed in 0..20 {
            match simulate_particle_euler(&m, &g, 2, seed) {
                Err(Error::ParticleCollapse { .. }) => seen_collapse = true,
                Err(e) => panic!("unexpected error {e}"),
                Ok(_) => {}
            }
        }
        assert!(seen_collapse);
    }
}
