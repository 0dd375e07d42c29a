//! Path simulation.
//!
//! Three routes:
//! - exact Gaussian sampling on the grid from the independent-increment
//!   representation of each explicit solution,
//! - a frozen-coefficient scheme that integrates the linear SDE
//!   `dX = -μ(t) X/(T - t) dt + σ(t) dW` with `μ, σ` taken from the moment curve,
//! - an interacting-particle scheme in which every expectation is replaced by
//!   the ensemble average at the current step.
//!
//! Every path draws from its own stream (see [`derive_path_stream`]), so an
//! ensemble is identical for any number of worker threads.

mod euler;
mod exact;
mod rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;

pub use euler::{
    simulate_frozen_euler, simulate_frozen_euler_with, simulate_particle_euler, simulate_particle_euler_with,
    FrozenEulerOptions, PARTICLE_MEAN_FLOOR,
};
pub use exact::{simulate_bridge_exact, simulate_power_exact, simulate_second_moment_exact};
pub use rng::{derive_path_stream, PathRng, STREAM_RULE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExactGaussian,
    FrozenEuler,
    ParticleEuler,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ExactGaussian => "exact_gaussian",
            Scheme::FrozenEuler => "frozen_euler",
            Scheme::ParticleEuler => "particle_euler",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact_gaussian" => Ok(Scheme::ExactGaussian),
            "frozen" | "frozen_euler" => Ok(Scheme::FrozenEuler),
            "particle" | "particle_euler" => Ok(Scheme::ParticleEuler),
            _ => Err(Error::Usage(format!("unknown scheme '{s}' (expected exact, frozen or particle)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSchedule {
    pub master_seed: u64,
    pub rule: String,
}

impl SeedSchedule {
    pub fn new(master_seed: u64) -> Self {
        SeedSchedule {
            master_seed,
            rule: STREAM_RULE.to_string(),
        }
    }
}

/// Simulated paths stored row-major: `n_paths` rows of `grid.len()` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub model: ModelSpec,
    pub seed_schedule: SeedSchedule,
    pub scheme: Scheme,
    n_paths: usize,
    paths: Vec<f64>,
}

impl PathEnsemble {
    /// Wraps existing path values; `paths.len()` must equal `n_paths * grid.len()`
    /// and every value must be finite.
    pub fn from_parts(
        grid: TimeGrid,
        model: ModelSpec,
        seed_schedule: SeedSchedule,
        scheme: Scheme,
        n_paths: usize,
        paths: Vec<f64>,
    ) -> Result<Self> {
        if paths.len() != n_paths * grid.len() {
            return Err(Error::domain(
                "PathEnsemble",
                format!("{} values for {n_paths} paths on {} grid points", paths.len(), grid.len()),
            ));
        }
        if let Some(i) = paths.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(
                "PathEnsemble",
                format!("non-finite value in path {} at t = {}", i / grid.len(), grid.times()[i % grid.len()]),
            ));
        }
        Ok(PathEnsemble {
            grid,
            model,
            seed_schedule,
            scheme,
            n_paths,
            paths,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.grid.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.n_times();
        &self.paths[i * n..(i + 1) * n]
    }

    pub fn value(&self, path: usize, t_index: usize) -> f64 {
        self.paths[path * self.n_times() + t_index]
    }

    /// All path values at one grid index.
    pub fn column(&self, t_index: usize) -> Vec<f64> {
        (0..self.n_paths).map(|i| self.value(i, t_index)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.paths
    }
}

/// Runs `scheme` for `model`; `n_paths` is the particle count for the particle scheme.
pub fn simulate(model: &ModelSpec, grid: &TimeGrid, n_paths: usize, seed: u64, scheme: Scheme) -> Result<PathEnsemble> {
    match scheme {
        Scheme::ExactGaussian => match model {
            ModelSpec::PowerMean(p) => simulate_power_exact(p, grid, n_paths, seed),
            ModelSpec::PowerSecondMoment(p) => {
                if !p.is_explicit() {
                    return Err(Error::Unsupported(format!(
                        "exact sampling needs alpha = 1 and x0 = 0 (got alpha = {}, x0 = {}); use the particle or frozen scheme",
                        p.alpha, p.x0
                    )));
                }
                simulate_second_moment_exact(p.horizon, grid, n_paths, seed)
            }
            ModelSpec::ReferenceBrownianBridge { x0, horizon } => simulate_bridge_exact(*x0, *horizon, grid, n_paths, seed),
            ModelSpec::General(_) => Err(Error::Unsupported(
                "the general family has no exact sampler; use the frozen or particle scheme".into(),
            )),
        },
        Scheme::FrozenEuler => simulate_frozen_euler(model, grid, n_paths, seed),
        Scheme::ParticleEuler => simulate_particle_euler(model, grid, n_paths, seed),
    }
}

/// Shared preconditions of every simulator.
pub(crate) fn check_simulation_inputs(func: &'static str, horizon: f64, grid: &TimeGrid, n_paths: usize) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::domain(func, "n_paths must be >= 1"));
    }
    if (grid.horizon() - horizon).abs() > 1e-12 * horizon {
        return Err(Error::domain(
            func,
            format!("grid horizon {} differs from model horizon {horizon}", grid.horizon()),
        ));
    }
    if grid.times()[0] != 0.0 {
        return Err(Error::domain(func, "simulation grids must start at t = 0"));
    }
    Ok(())
}
