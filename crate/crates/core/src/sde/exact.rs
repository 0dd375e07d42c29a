//! Exact Gaussian sampling at the grid points.
//!
//! Each explicit solution is a deterministic function of time applied to a
//! martingale with independent Gaussian increments:
//!
//! | family | martingale | path |
//! |---|---|---|
//! | power mean | `M_t = 1 + ∫ (a_α - α ln(T-s))^{1/α} dW` | `E[X_t] M_t` |
//! | second moment, `α = 1`, `x0 = 0` | `N_t = ∫ √g dW` | `N_t / √g(t)` |
//! | Brownian bridge | `B_t = ∫ dW / (T-s)` | `x0 (T-t)/T + (T-t) B_t` |

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{check_simulation_inputs, derive_path_stream, PathEnsemble, Scheme, SeedSchedule};
use crate::closed_form::{mean_power, BesselKernel};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{ModelSpec, PowerMeanParams, SecondMomentParams};
use crate::quadrature::integrate;

/// Samples `value_j = scale[j] * M_j + shift[j]` with `M_0 = m0` and independent
/// increments `M_{j+1} - M_j ~ N(0, sd[j]²)`.
fn sample_martingale(
    n_paths: usize,
    seed: u64,
    m0: f64,
    sd: &[f64],
    scale: &[f64],
    shift: &[f64],
) -> Vec<f64> {
    let n_times = scale.len();
    let mut paths = vec![0.0; n_paths * n_times];
    paths.par_chunks_mut(n_times).enumerate().for_each(|(i, row)| {
        let mut rng = derive_path_stream(seed, i as u64);
        let mut m = m0;
        row[0] = scale[0] * m + shift[0];
        for j in 1..n_times {
            let z: f64 = rng.sample(StandardNormal);
            m += sd[j - 1] * z;
            row[j] = scale[j] * m + shift[j];
        }
    });
    paths
}

fn finish(
    grid: &TimeGrid,
    model: ModelSpec,
    seed: u64,
    n_paths: usize,
    paths: Vec<f64>,
) -> Result<PathEnsemble> {
    PathEnsemble::from_parts(
        grid.clone(),
        model,
        SeedSchedule::new(seed),
        Scheme::ExactGaussian,
        n_paths,
        paths,
    )
}

/// Power-mean family: `X_t = E[X_t] M_t` with increment variances
/// `∫_{t_j}^{t_{j+1}} (a_α - α ln(T - u))^{2/α} du` from adaptive quadrature.
pub fn simulate_power_exact(p: &PowerMeanParams, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    p.validate()?;
    check_simulation_inputs("simulate_power_exact", p.horizon, grid, n_paths)?;
    let ts = grid.times();
    let (a, alpha, horizon) = (p.a_alpha(), p.alpha, p.horizon);
    let density = |u: f64| (a - alpha * (horizon - u).ln()).powf(2.0 / alpha);
    let sd = ts
        .windows(2)
        .map(|w| Ok(integrate(density, w[0], w[1], 1e-15, 1e-13)?.value.max(0.0).sqrt()))
        .collect::<Result<Vec<_>>>()?;
    let scale = ts.iter().map(|&t| mean_power(t, p)).collect::<Result<Vec<_>>>()?;
    let shift = vec![0.0; ts.len()];
    let paths = sample_martingale(n_paths, seed, 1.0, &sd, &scale, &shift);
    finish(grid, ModelSpec::PowerMean(*p), seed, n_paths, paths)
}

/// Second-moment family with `α = 1`, `x0 = 0`: `Y_t = N_t / √g(t)` where the
/// increments of `N` have variance `⟨N⟩_{t_{j+1}} - ⟨N⟩_{t_j}`.
pub fn simulate_second_moment_exact(horizon: f64, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    let params = SecondMomentParams::new(1.0, 0.0, horizon)?;
    check_simulation_inputs("simulate_second_moment_exact", horizon, grid, n_paths)?;
    let kernel = BesselKernel::new(horizon)?;
    let ts = grid.times();
    let bracket = ts.iter().map(|&t| kernel.bracket(t)).collect::<Result<Vec<_>>>()?;
    let sd: Vec<f64> = bracket.windows(2).map(|w| (w[1] - w[0]).max(0.0).sqrt()).collect();
    let scale = ts
        .iter()
        .map(|&t| Ok(1.0 / kernel.g(t)?.sqrt()))
        .collect::<Result<Vec<_>>>()?;
    let shift = vec![0.0; ts.len()];
    let paths = sample_martingale(n_paths, seed, 0.0, &sd, &scale, &shift);
    finish(grid, ModelSpec::PowerSecondMoment(params), seed, n_paths, paths)
}

/// Classical Brownian bridge from `x0` to 0 at `T`.
pub fn simulate_bridge_exact(x0: f64, horizon: f64, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    let model = ModelSpec::ReferenceBrownianBridge { x0, horizon };
    model.validate()?;
    check_simulation_inputs("simulate_bridge_exact", horizon, grid, n_paths)?;
    let ts = grid.times();
    let sd: Vec<f64> = ts
        .windows(2)
        .map(|w| ((w[1] - w[0]) / ((horizon - w[0]) * (horizon - w[1]))).sqrt())
        .collect();
    let scale: Vec<f64> = ts.iter().map(|&t| horizon - t).collect();
    let shift: Vec<f64> = ts.iter().map(|&t| x0 * (horizon - t) / horizon).collect();
    let paths = sample_martingale(n_paths, seed, 0.0, &sd, &scale, &shift);
    if paths.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("simulate_bridge_exact", "non-finite path value"));
    }
    finish(grid, model, seed, n_paths, paths)
}
