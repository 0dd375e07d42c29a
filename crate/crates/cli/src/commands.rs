use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use mvbridge_core::closed_form::{default_quantity, moment_curve_of, BesselKernel, Quantity};
use mvbridge_core::ode::{solve_general_ode, solve_second_moment_ode, OdeSolution, StepStats};
use mvbridge_core::sde::{
    simulate as simulate_scheme, simulate_frozen_euler_with, simulate_particle_euler_with, FrozenEulerOptions,
    PathEnsemble, Scheme,
};
use mvbridge_core::specfun::{
    bessel_i, bessel_k, gaussian_expectation_est, lower_inc_gamma, upper_inc_gamma, PhiFn, SpecFunResult,
    DEFAULT_HERMITE_ORDER,
};
use mvbridge_core::stats::{
    ensemble_moments, pinned_delta, pinned_diagnostic, validate as run_validation, validation_ensemble, Budget,
    ValidateOptions, Verdict, PINNED_EPS,
};
use mvbridge_core::{ModelSpec, TimeGrid};
use serde::Serialize;

use crate::config::{resolve, OutputFormat, ResolvedConfig};
use crate::output::{fmt_f64, write_json_with_meta, write_paths_binary, write_paths_csv, Meta, TOOL_VERSION};
use crate::{set, CliError, OdeArgs, PlotArgs, SimulateArgs, SpecfunArgs, TableArgs, ValidateArgs};

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn out_path(flag: &Option<PathBuf>, file: &Option<String>) -> Option<PathBuf> {
    flag.clone().or_else(|| file.as_ref().map(PathBuf::from))
}

/// `points` equally spaced times from 0 to `T - ε`.
fn point_grid(cfg: &ResolvedConfig) -> Result<TimeGrid, CliError> {
    let points = cfg.grid.points;
    if points < 2 {
        return Err(CliError::Usage(format!("points = {points} must be at least 2")));
    }
    Ok(TimeGrid::uniform(
        cfg.model.horizon(),
        points - 1,
        cfg.grid.truncation_eps,
    )?)
}

pub fn table(a: &TableArgs) -> Result<(), CliError> {
    let mut f = a.model.file_config()?;
    set(&mut f.grid.points, &a.points);
    set(&mut f.output.quantity, &a.quantity);
    let out = out_path(&a.out, &f.output.path);
    let cfg = resolve("table", f)?;
    let grid = point_grid(&cfg)?;
    let curve = moment_curve_of(&cfg.model, &grid, cfg.output.quantity)?;
    let mut w = open_out(out.as_deref())?;
    Meta::new(&cfg, None).write_csv_header(&mut w)?;
    writeln!(w, "t,value,quantity,provenance")?;
    for (t, v) in curve.grid.times().iter().zip(&curve.values) {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(*v),
            curve.quantity.as_str(),
            curve.provenance.as_str()
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct OdeSidecar {
    step_stats: StepStats,
    terminal_estimate: f64,
    tol: f64,
    points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_abs_diff_vs_closed_form: Option<f64>,
}

fn solve_ode(cfg: &ResolvedConfig, grid: &TimeGrid) -> Result<OdeSolution, CliError> {
    match &cfg.model {
        ModelSpec::PowerSecondMoment(p) => Ok(solve_second_moment_ode(p.alpha, p.x0, p.horizon, grid, cfg.ode.tol)?),
        ModelSpec::General(p) => Ok(solve_general_ode(p, grid, cfg.ode.tol, cfg.ode.quad_order)?),
        other => Err(CliError::Usage(format!(
            "ode applies to the second-moment and general families, not {}",
            other.family()
        ))),
    }
}

pub fn ode(a: &OdeArgs) -> Result<(), CliError> {
    let mut f = a.model.file_config()?;
    set(&mut f.grid.points, &a.grid_points);
    set(&mut f.ode.tol, &a.tol);
    set(&mut f.ode.quad_order, &a.quad_order);
    let cfg = resolve("ode", f)?;
    let grid = point_grid(&cfg)?;
    let sol = solve_ode(&cfg, &grid)?;
    let max_diff = match &cfg.model {
        ModelSpec::PowerSecondMoment(p) if p.is_explicit() => {
            let k = BesselKernel::new(p.horizon)?;
            let mut worst = 0.0f64;
            for (t, e) in grid.times().iter().zip(&sol.eta) {
                worst = worst.max((e - k.variance(*t)?).abs());
            }
            Some(worst)
        }
        _ => None,
    };
    let meta = Meta::new(&cfg, None);
    let mut w = open_out(Some(&a.out))?;
    meta.write_csv_header(&mut w)?;
    writeln!(w, "t,eta")?;
    for (t, e) in grid.times().iter().zip(&sol.eta) {
        writeln!(w, "{},{}", fmt_f64(*t), fmt_f64(*e))?;
    }
    w.flush()?;
    let sidecar_path = a.sidecar.clone().unwrap_or_else(|| a.out.with_extension("json"));
    let sidecar = OdeSidecar {
        step_stats: sol.step_stats,
        terminal_estimate: sol.terminal_estimate,
        tol: sol.tol,
        points: grid.len(),
        max_abs_diff_vs_closed_form: max_diff,
    };
    let mut w = open_out(Some(&sidecar_path))?;
    write_json_with_meta(&mut w, &meta, &sidecar)?;
    w.flush()?;
    Ok(())
}

fn run_scheme(cfg: &ResolvedConfig, grid: &TimeGrid) -> Result<PathEnsemble, CliError> {
    let s = &cfg.simulation;
    let opts = FrozenEulerOptions {
        substeps: s.substeps,
        ..Default::default()
    };
    Ok(match s.scheme {
        Scheme::ExactGaussian => simulate_scheme(&cfg.model, grid, s.paths, s.seed, Scheme::ExactGaussian)?,
        Scheme::FrozenEuler => simulate_frozen_euler_with(&cfg.model, grid, s.paths, s.seed, opts)?,
        Scheme::ParticleEuler => simulate_particle_euler_with(&cfg.model, grid, s.paths, s.seed, opts)?,
    })
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut f = a.model.file_config()?;
    set(&mut f.simulation.scheme, &a.scheme);
    set(&mut f.simulation.paths, &a.paths);
    set(&mut f.simulation.seed, &a.seed);
    set(&mut f.simulation.substeps, &a.substeps);
    set(&mut f.grid.steps, &a.steps);
    set(&mut f.output.format, &a.format);
    let out = out_path(&a.out, &f.output.path);
    let cfg = resolve("simulate", f)?;
    if cfg.grid.steps == 0 {
        return Err(CliError::Usage("steps must be at least 1".into()));
    }
    let grid = TimeGrid::uniform(cfg.model.horizon(), cfg.grid.steps, cfg.grid.truncation_eps)?;
    let ens = run_scheme(&cfg, &grid)?;
    let meta = Meta::new(&cfg, Some(cfg.simulation.seed));
    let mut w = open_out(out.as_deref())?;
    match cfg.output.format {
        OutputFormat::Csv => write_paths_csv(&mut w, &meta, &ens)?,
        OutputFormat::Binary => write_paths_binary(&mut w, &meta, &ens)?,
    }
    w.flush()?;
    Ok(())
}

pub fn validate(a: &ValidateArgs) -> Result<(), CliError> {
    let mut f = a.model.file_config()?;
    set(&mut f.simulation.paths, &a.paths);
    set(&mut f.simulation.seed, &a.seed);
    set(&mut f.grid.steps, &a.steps);
    set(&mut f.validation.z_threshold, &a.z_threshold);
    set(&mut f.validation.inject_bias, &a.inject_bias);
    set(&mut f.validation.checks, &a.checks);
    let out = out_path(&a.out, &f.output.path);
    let cfg = resolve("validate", f)?;
    let budget = Budget {
        n_paths: cfg.simulation.paths,
        steps: cfg.grid.steps,
        seed: cfg.simulation.seed,
    };
    let opts = ValidateOptions {
        z_threshold: cfg.validation.z_threshold,
        inject_bias: cfg.validation.inject_bias,
    };
    let mut report = run_validation(&cfg.model, budget, opts)?;
    let keep = &cfg.validation.checks;
    if !keep.is_empty() {
        report.checks.retain(|c| keep.iter().any(|k| c.name.starts_with(k.as_str())));
    }
    let mut w = open_out(out.as_deref())?;
    write_json_with_meta(&mut w, &Meta::new(&cfg, Some(budget.seed)), &report)?;
    w.flush()?;
    let (pass, fail, inconclusive) = (
        report.count(Verdict::Pass),
        report.count(Verdict::Fail),
        report.count(Verdict::Inconclusive),
    );
    eprintln!("validate: {pass} passed, {fail} failed, {inconclusive} inconclusive");
    if inconclusive > 0 {
        eprintln!("warning: {inconclusive} check(s) inconclusive");
        for c in report.checks.iter().filter(|c| c.verdict == Verdict::Inconclusive) {
            eprintln!("  {}: {}", c.name, c.note.as_deref().unwrap_or(""));
        }
    }
    if fail > 0 {
        for c in report.checks.iter().filter(|c| c.verdict == Verdict::Fail) {
            eprintln!(
                "  FAIL {}: statistic {} target {} tolerance {}",
                c.name, c.statistic, c.target, c.tolerance
            );
        }
        return Err(CliError::ValidationFailed(fail));
    }
    Ok(())
}

/// Type-7 sample quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn plotdata(a: &PlotArgs) -> Result<(), CliError> {
    let mut f = a.model.file_config()?;
    set(&mut f.simulation.paths, &a.paths);
    set(&mut f.simulation.seed, &a.seed);
    set(&mut f.grid.steps, &a.steps);
    let cfg = resolve("plotdata", f)?;
    let model = &cfg.model;
    let budget = Budget {
        n_paths: cfg.simulation.paths,
        steps: cfg.grid.steps,
        seed: cfg.simulation.seed,
    };
    let (_, ens) = validation_ensemble(model, budget);
    let ens = ens?;
    if ens.n_paths() < 2 {
        return Err(CliError::Usage("plotdata needs at least 2 paths".into()));
    }
    let grid = ens.grid.clone();
    let quantity = default_quantity(model);
    let curve = moment_curve_of(model, &grid, quantity)?;
    let ode_curve = match model {
        ModelSpec::PowerSecondMoment(p) if p.is_explicit() => Some(solve_ode(&cfg, &grid)?.eta),
        _ => None,
    };
    std::fs::create_dir_all(&a.out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", a.out.display())))?;
    let meta = Meta::new(&cfg, Some(budget.seed));

    let mut w = open_out(Some(&a.out.join("curves.csv")))?;
    meta.write_csv_header(&mut w)?;
    writeln!(w, "# quantity: {}", quantity.as_str())?;
    writeln!(w, "series,t,value")?;
    let ts = grid.times();
    for (t, v) in ts.iter().zip(&curve.values) {
        writeln!(w, "{},{},{}", curve.provenance.as_str(), fmt_f64(*t), fmt_f64(*v))?;
    }
    if let Some(eta) = &ode_curve {
        for (t, v) in ts.iter().zip(eta) {
            writeln!(w, "ode,{},{}", fmt_f64(*t), fmt_f64(*v))?;
        }
    }
    let mut bands = Vec::with_capacity(ts.len());
    for (j, t) in ts.iter().enumerate() {
        let m = ensemble_moments(&ens, j)?;
        let est = match quantity {
            Quantity::SecondMoment => m.second_moment,
            _ => m.mean,
        };
        writeln!(w, "mc_mean,{},{}", fmt_f64(*t), fmt_f64(est))?;
        let mut col = ens.column(j);
        col.sort_by(f64::total_cmp);
        bands.push((quantile(&col, 0.05), quantile(&col, 0.95)));
    }
    for (t, (p05, _)) in ts.iter().zip(&bands) {
        writeln!(w, "mc_p05,{},{}", fmt_f64(*t), fmt_f64(*p05))?;
    }
    for (t, (_, p95)) in ts.iter().zip(&bands) {
        writeln!(w, "mc_p95,{},{}", fmt_f64(*t), fmt_f64(*p95))?;
    }
    w.flush()?;

    let eps_abs: Vec<f64> = PINNED_EPS.iter().map(|e| e * model.horizon()).collect();
    let d = pinned_diagnostic(&ens, pinned_delta(model), &eps_abs)?;
    let mut w = open_out(Some(&a.out.join("pinned.csv")))?;
    meta.write_csv_header(&mut w)?;
    writeln!(w, "# delta: {}", fmt_f64(d.delta))?;
    writeln!(w, "eps,fraction,se")?;
    for r in &d.rows {
        writeln!(w, "{},{},{}", fmt_f64(r.eps), fmt_f64(r.fraction), fmt_f64(r.se))?;
    }
    w.flush()?;

    let mut w = open_out(Some(&a.out.join("paths.csv")))?;
    meta.write_csv_header(&mut w)?;
    writeln!(w, "path_id,t,value")?;
    for i in 0..a.sample_paths.min(ens.n_paths()) {
        for (t, v) in ts.iter().zip(ens.path(i)) {
            writeln!(w, "{i},{},{}", fmt_f64(*t), fmt_f64(*v))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SpecfunOutput<'a> {
    tool: &'static str,
    version: &'static str,
    function: &'a str,
    order: f64,
    x: f64,
    #[serde(flatten)]
    result: SpecFunResult,
}

fn bessel_order(order: f64) -> Result<u32, CliError> {
    if order == 0.0 || order == 1.0 {
        Ok(order as u32)
    } else {
        Err(CliError::Usage(format!("Bessel order {order} is not supported (use 0 or 1)")))
    }
}

pub fn specfun_eval(a: &SpecfunArgs) -> Result<(), CliError> {
    let result = match a.function.as_str() {
        "bessel_i" => bessel_i(bessel_order(a.order)?, a.x)?,
        "bessel_k" => bessel_k(bessel_order(a.order)?, a.x)?,
        "lower_gamma" => lower_inc_gamma(a.order, a.x)?,
        "upper_gamma" => upper_inc_gamma(a.order, a.x)?,
        other => match other.strip_prefix("expect:") {
            Some(desc) => {
                let phi: PhiFn = desc.parse()?;
                let n = if a.order == 0.0 {
                    DEFAULT_HERMITE_ORDER
                } else if a.order > 0.0 && a.order.fract() == 0.0 {
                    a.order as usize
                } else {
                    return Err(CliError::Usage(format!("quadrature order {} must be a positive integer", a.order)));
                };
                gaussian_expectation_est(&phi, a.x, n)?
            }
            None => {
                return Err(CliError::Usage(format!(
                    "unknown function '{other}' (expected bessel_i, bessel_k, lower_gamma, upper_gamma or expect:<phi>)"
                )))
            }
        },
    };
    let out = SpecfunOutput {
        tool: "mvbridge",
        version: TOOL_VERSION,
        function: &a.function,
        order: a.order,
        x: a.x,
        result,
    };
    let mut w = io::stdout().lock();
    serde_json::to_writer(&mut w, &out).map_err(io::Error::other)?;
    writeln!(w)?;
    Ok(())
}
