//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use mvbridge_core::closed_form::{bracket_n, cov_power, mean_power, variance_second_moment, BesselKernel};
use mvbridge_core::ode::{solve_general_ode, solve_second_moment_ode};
use mvbridge_core::sde::{
    derive_path_stream, simulate, simulate_frozen_euler_with, simulate_particle_euler_with, FrozenEulerOptions,
    PathEnsemble, Scheme,
};
use mvbridge_core::specfun::{
    bessel_i, bessel_k, gamma, gaussian_expectation, lower_inc_gamma, upper_inc_gamma, PhiFn,
};
use mvbridge_core::stats::{
    covariance_check, ensemble_moments, increment_independence, validation_ensemble, validation_grid, Budget,
    IncrementTransform, PINNED_EPS, VALIDATION_INTERVALS,
};
use mvbridge_core::{
    CoeffFn, GeneralModelParams, ModelSpec, PowerMeanParams, SecondMomentParams, TimeGrid,
};
use mvbridge_core::model::EnvelopeFn;
use rand::Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = fn() -> Result<Outcome, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn checkpoints(horizon: f64) -> Vec<f64> {
    let mut ts: Vec<f64> = (1..10).map(|k| k as f64 * horizon / 10.0).collect();
    ts.push(horizon - PINNED_EPS[0] * horizon);
    ts
}

fn index(e: &PathEnsemble, t: f64) -> Result<usize, String> {
    e.grid.index_of(t).ok_or_else(|| format!("t = {t} is not on the grid"))
}

fn special_functions() -> Result<Outcome, String> {
    let start = Instant::now();
    let mut wronskian = 0.0f64;
    for z in log_points(1e-6, 50.0, 100) {
        let w = bessel_i(0, z).map_err(err)?.value * bessel_k(1, z).map_err(err)?.value
            + bessel_i(1, z).map_err(err)?.value * bessel_k(0, z).map_err(err)?.value;
        wronskian = wronskian.max((w * z - 1.0).abs());
    }
    let mut complement = 0.0f64;
    for &b in &[0.3, 1.0, 1.5, 2.5, 3.0, 7.5, 20.0] {
        for x in log_points(1e-3, 60.0, 40) {
            let s = lower_inc_gamma(b, x).map_err(err)?.value + upper_inc_gamma(b, x).map_err(err)?.value;
            complement = complement.max((s / gamma(b) - 1.0).abs());
        }
    }
    let u: f64 = 1e-10;
    let limit = u.sqrt() * bessel_k(1, 2.0 * 2f64.sqrt() * u.sqrt()).map_err(err)?.value;
    let limit_err = (limit - 2f64.sqrt() / 4.0).abs();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = wronskian <= 1e-10 && complement <= 1e-12 && limit_err <= 1e-6 && elapsed < 1.0;
    Ok(outcome(
        pass,
        format!(
            "wronskian rel {wronskian:.1e} (<= 1e-10), gamma complement rel {complement:.1e} (<= 1e-12), \
             K1 limit err {limit_err:.1e} (<= 1e-6), {elapsed:.3}s (< 1s)"
        ),
    ))
}

fn bessel_vs_ode() -> Result<Outcome, String> {
    let start = Instant::now();
    let grid = TimeGrid::uniform(1.0, 199, 1e-4).map_err(err)?;
    let sol = solve_second_moment_ode(1.0, 0.0, 1.0, &grid, 1e-10).map_err(err)?;
    let mut worst = 0.0f64;
    for (t, f) in grid.times().iter().zip(&sol.eta) {
        worst = worst.max((f - variance_second_moment(*t, 1.0).map_err(err)?).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(outcome(
        worst <= 1e-8 && elapsed < 5.0,
        format!("max |f - v| = {worst:.2e} on 200 points (<= 1e-8), {elapsed:.3}s (< 5s)"),
    ))
}

fn riccati_residual() -> Result<Outcome, String> {
    let horizon = 1.0;
    let k = BesselKernel::new(horizon).map_err(err)?;
    let v = |t: f64| k.variance(t);
    let mut ts: Vec<f64> = (0..=400).map(|i| i as f64 * (1.0 - 1e-4) / 400.0).collect();
    ts.extend(log_points(1e-4, 1e-1, 60).iter().map(|d| horizon - d));
    let mut worst = 0.0f64;
    for &t in &ts {
        let h = (0.002 * (horizon - t)).min(1e-3);
        let dv = if t >= 2.0 * h {
            (v(t - 2.0 * h).map_err(err)? - 8.0 * v(t - h).map_err(err)? + 8.0 * v(t + h).map_err(err)?
                - v(t + 2.0 * h).map_err(err)?)
                / (12.0 * h)
        } else {
            (-25.0 * v(t).map_err(err)? + 48.0 * v(t + h).map_err(err)? - 36.0 * v(t + 2.0 * h).map_err(err)?
                + 16.0 * v(t + 3.0 * h).map_err(err)?
                - 3.0 * v(t + 4.0 * h).map_err(err)?)
                / (12.0 * h)
        };
        let vt = v(t).map_err(err)?;
        worst = worst.max((dv + 2.0 * vt * vt / (horizon - t) - 1.0).abs());
    }
    let v0 = v(0.0).map_err(err)?;
    Ok(outcome(
        worst <= 1e-7 && v0 == 0.0,
        format!("max residual {worst:.2e} at {} points of [0, T - 1e-4] (<= 1e-7), v(0) = {v0}", ts.len()),
    ))
}

fn bracket_saturation() -> Result<Outcome, String> {
    let b = bracket_n(1.0 - 1e-8, 1.0).map_err(err)?;
    let target = bessel_i(1, 2.0 * 2f64.sqrt()).map_err(err)?.value / 4.0;
    let gap = (b - target).abs();
    Ok(outcome(
        gap <= 1e-4,
        format!("<N> at T - 1e-8 = {b:.10}, I1(2 sqrt 2)/4 = {target:.10}, gap {gap:.1e} (<= 1e-4)"),
    ))
}

fn monte_carlo_moments() -> Result<Outcome, String> {
    let start = Instant::now();
    let n = 100_000;
    let power = PowerMeanParams::new(1.0, 1.0, 1.0).map_err(err)?;
    let models = [
        ModelSpec::PowerMean(power),
        ModelSpec::PowerSecondMoment(SecondMomentParams::new(1.0, 0.0, 1.0).map_err(err)?),
    ];
    let mut worst_moment = 0.0f64;
    let mut worst_cov = 0.0f64;
    let mut comparisons = 0;
    for (m, model) in models.iter().enumerate() {
        let grid = validation_grid(1.0).map_err(err)?;
        let ens = simulate(model, &grid, n, SEED + m as u64, Scheme::ExactGaussian).map_err(err)?;
        for t in checkpoints(1.0) {
            let mo = ensemble_moments(&ens, index(&ens, t)?).map_err(err)?;
            let (mean, var) = match model {
                ModelSpec::PowerMean(p) => (mean_power(t, p).map_err(err)?, cov_power(t, t, p).map_err(err)?),
                _ => (0.0, variance_second_moment(t, 1.0).map_err(err)?),
            };
            worst_moment = worst_moment
                .max((mo.mean - mean).abs() / mo.se_mean)
                .max((mo.variance - var).abs() / mo.se_variance);
            comparisons += 2;
        }
        let pairs = [(0.0, 0.5), (0.25, 0.75), (0.3, 0.6), (0.5, 0.9), (0.6, 0.99)];
        for rec in covariance_check(&ens, &pairs).map_err(err)? {
            worst_cov = worst_cov.max(rec.z_score.abs());
            comparisons += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(outcome(
        worst_moment <= 3.0 && worst_cov <= 4.0 && elapsed < 60.0,
        format!(
            "{comparisons} comparisons at n = {n}: max moment |z| {worst_moment:.2} (<= 3), \
             max covariance |z| {worst_cov:.2} (<= 4), {elapsed:.1}s (< 60s)"
        ),
    ))
}

fn independent_increments() -> Result<Outcome, String> {
    let n = 100_000;
    let grid = validation_grid(1.0).map_err(err)?;
    let cases = [
        (
            ModelSpec::PowerMean(PowerMeanParams::new(1.0, 1.0, 1.0).map_err(err)?),
            IncrementTransform::MPower,
        ),
        (
            ModelSpec::PowerSecondMoment(SecondMomentParams::new(1.0, 0.0, 1.0).map_err(err)?),
            IncrementTransform::NSecondMoment,
        ),
    ];
    let bound = 4.0 / (n as f64).sqrt();
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for (k, (model, transform)) in cases.iter().enumerate() {
        let ens = simulate(model, &grid, n, SEED + 10 + k as u64, Scheme::ExactGaussian).map_err(err)?;
        for r in increment_independence(&ens, *transform).map_err(err)? {
            worst = worst.max(r.rho.abs());
            pairs += 1;
        }
    }
    Ok(outcome(
        worst <= bound,
        format!("max |rho| {worst:.2e} over {pairs} increment pairs (<= 4/sqrt(n) = {bound:.2e})"),
    ))
}

fn pinned_diagnostics() -> Result<Outcome, String> {
    let models = [
        (ModelSpec::PowerMean(PowerMeanParams::new(1.0, 1.0, 1.0).map_err(err)?), 100_000),
        (ModelSpec::PowerMean(PowerMeanParams::new(2.5, 0.5, 2.0).map_err(err)?), 100_000),
        (ModelSpec::PowerSecondMoment(SecondMomentParams::new(1.0, 0.0, 1.0).map_err(err)?), 100_000),
        (ModelSpec::PowerSecondMoment(SecondMomentParams::new(2.0, 0.5, 1.0).map_err(err)?), 20_000),
        (ModelSpec::General(GeneralModelParams::example(0.0, 1.0)), 20_000),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (model, n)) in models.iter().enumerate() {
        let horizon = model.horizon();
        let budget = Budget {
            n_paths: *n,
            steps: 1024,
            seed: SEED + 20 + k as u64,
        };
        let (_, ens) = validation_ensemble(model, budget);
        let ens = ens.map_err(err)?;
        let x0 = model.x0();
        let delta = 0.1 * (x0 * x0 + horizon).sqrt();
        let mut fractions = Vec::new();
        let mut seconds = Vec::new();
        for e in PINNED_EPS {
            let j = index(&ens, horizon - e * horizon)?;
            let col = ens.column(j);
            fractions.push(col.iter().filter(|x| x.abs() <= delta).count() as f64 / *n as f64);
            seconds.push(col.iter().map(|x| x * x).sum::<f64>() / *n as f64);
        }
        let frac_ok = fractions.windows(2).all(|w| w[1] >= w[0]);
        let decay_ok = seconds.windows(2).all(|w| w[1] < w[0]);
        pass &= frac_ok && decay_ok;
        parts.push(format!(
            "{} fractions [{}] second moments [{}]",
            model.family(),
            fractions.iter().map(|f| format!("{f:.3}")).collect::<Vec<_>>().join(", "),
            seconds.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>().join(", ")
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn general_self_consistency() -> Result<Outcome, String> {
    let horizon = 1.0;
    let mut p = GeneralModelParams::example(0.0, horizon);
    p.mu = CoeffFn::identity();
    p.phi1 = PhiFn::Square;
    p.sigma = CoeffFn::constant(1.0);
    p.sigma_envelope = EnvelopeFn::Constant { value: 1.0 };
    let grid = TimeGrid::uniform(horizon, 199, 1e-4).map_err(err)?;
    let general = solve_general_ode(&p, &grid, 1e-10, 64).map_err(err)?;
    let reference = solve_second_moment_ode(1.0, 0.0, horizon, &grid, 1e-10).map_err(err)?;
    let ode_gap = general
        .eta
        .iter()
        .zip(&reference.eta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let n = 10_000;
    let substeps = 1024usize.div_ceil(VALIDATION_INTERVALS);
    let vgrid = validation_grid(horizon).map_err(err)?;
    let model = ModelSpec::General(p.clone());
    let opts = FrozenEulerOptions {
        substeps,
        ..Default::default()
    };
    let ens = simulate_frozen_euler_with(&model, &vgrid, n, SEED + 30, opts).map_err(err)?;
    let eta = solve_general_ode(&p, &vgrid, 1e-10, 64).map_err(err)?;
    let dt = horizon / (VALIDATION_INTERVALS * substeps) as f64;
    let mut worst = 0.0f64;
    for t in checkpoints(horizon) {
        let j = index(&ens, t)?;
        for phi in [&p.phi1, &p.phi2] {
            let vals: Vec<f64> = ens.column(j).iter().map(|&x| phi.eval(x)).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let se = (var / n as f64).sqrt();
            let target = gaussian_expectation(phi, eta.eta[j], 64).map_err(err)?;
            let ratio = (mean - target).abs() / (5.0 * se + dt * (1.0 + target.abs()));
            worst = worst.max(ratio);
        }
    }
    Ok(outcome(
        ode_gap <= 1e-7 && worst <= 1.0,
        format!(
            "general vs alpha=1 ODE gap {ode_gap:.2e} (<= 1e-7); max |E phi - Phi(eta)| / (5 SE + dt) = {worst:.2} \
             (<= 1) with n = {n}, {} steps",
            VALIDATION_INTERVALS * substeps
        ),
    ))
}

fn particle_convergence() -> Result<Outcome, String> {
    let p = PowerMeanParams::new(1.0, 1.0, 1.0).map_err(err)?;
    let model = ModelSpec::PowerMean(p);
    let n = 10_000;
    let grid = validation_grid(1.0).map_err(err)?;
    let opts = FrozenEulerOptions {
        substeps: 1024usize.div_ceil(VALIDATION_INTERVALS),
        ..Default::default()
    };
    let ens = simulate_particle_euler_with(&model, &grid, n, SEED + 40, opts).map_err(err)?;
    let mut worst_ratio = 0.0f64;
    let mut sup_gap = 0.0f64;
    for (j, &t) in grid.times().iter().enumerate() {
        let m = ensemble_moments(&ens, j).map_err(err)?;
        let gap = (m.mean - mean_power(t, &p).map_err(err)?).abs();
        sup_gap = sup_gap.max(gap);
        if gap > 0.0 {
            worst_ratio = worst_ratio.max(gap / (5.0 * m.se_mean));
        }
    }
    Ok(outcome(
        worst_ratio <= 1.0,
        format!(
            "sup |mean - E X| = {sup_gap:.2e}; max gap / (5 SE) = {worst_ratio:.2} (<= 1) over {} points, n = {n}",
            grid.len()
        ),
    ))
}

fn ode_bounds() -> Result<Outcome, String> {
    let mut rng = derive_path_stream(SEED, 0);
    let grid = TimeGrid::graded(1.0, 200, 20, 1e-6).map_err(err)?;
    let mut worst_bound = f64::NEG_INFINITY;
    let mut worst_rise = f64::NEG_INFINITY;
    let mut pass = true;
    for _ in 0..20 {
        let alpha = 3.0 * (1.0 - rng.random::<f64>());
        let x0 = 2.0 * rng.random::<f64>();
        let sol = solve_second_moment_ode(alpha, x0, 1.0, &grid, 1e-10).map_err(err)?;
        for (&t, &f) in grid.times().iter().zip(&sol.eta) {
            worst_bound = worst_bound.max(-f).max(f - (x0 + 1.0));
            pass &= f >= 0.0 && f <= x0 + 1.0;
            let _ = t;
        }
        let shifted: Vec<f64> = grid.times().iter().zip(&sol.eta).map(|(t, f)| f + (1.0 - t)).collect();
        for w in shifted.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
            pass &= w[1] <= w[0];
        }
    }
    Ok(outcome(
        pass,
        format!(
            "20 random (alpha, x0): max bound excess {worst_bound:.2e} (<= 0), \
             max increment of f + (T - t) {worst_rise:.2e} (<= 0)"
        ),
    ))
}

fn run_cli(threads: usize, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mvbridge"))
        .args(args)
        .env("MVBRIDGE_THREADS", threads.to_string())
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} with {threads} threads exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn determinism() -> Result<Outcome, String> {
    let runs: [&[&str]; 5] = [
        &["simulate", "--model", "power-mean", "--scheme", "exact", "--paths", "2000", "--steps", "50"],
        &["simulate", "--model", "general", "--scheme", "frozen", "--paths", "500", "--steps", "64", "--format", "binary"],
        &["simulate", "--model", "second-moment", "--alpha", "2", "--scheme", "particle", "--paths", "500", "--steps", "64"],
        &["validate", "--model", "power-mean", "--paths", "20000"],
        &["validate", "--model", "general", "--paths", "2000", "--steps", "256"],
    ];
    let mut compared = 0;
    for args in runs {
        let reference = run_cli(1, args)?;
        for threads in [1, 4, 8] {
            if run_cli(threads, args)? != reference {
                return Ok(outcome(false, format!("{args:?} differs with {threads} threads")));
            }
            compared += 1;
        }
    }
    Ok(outcome(
        true,
        format!("{compared} runs byte-identical to the single-thread reference (simulate and validate, 1/4/8 threads, repeated)"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 11] = [
        ("special-function kernel", special_functions),
        ("Bessel closed form vs moment ODE", bessel_vs_ode),
        ("Riccati residual of the closed form", riccati_residual),
        ("bracket saturation", bracket_saturation),
        ("Monte Carlo moment agreement", monte_carlo_moments),
        ("independent increments", independent_increments),
        ("pinned diagnostics", pinned_diagnostics),
        ("general-family self-consistency", general_self_consistency),
        ("particle vs mean-field convergence", particle_convergence),
        ("ODE bound preservation", ode_bounds),
        ("determinism across threads", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.1}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
