//! Experiment configuration: a TOML file with optional sections, overridden by
//! command-line flags and resolved into a fully defaulted, serializable form.

use std::path::Path;

use mvbridge_core::closed_form::{default_quantity, Quantity};
use mvbridge_core::grid::DEFAULT_TRUNCATION;
use mvbridge_core::model::EnvelopeFn;
use mvbridge_core::ode::DEFAULT_TOL;
use mvbridge_core::sde::Scheme;
use mvbridge_core::specfun::{PhiFn, DEFAULT_HERMITE_ORDER};
use mvbridge_core::stats::DEFAULT_Z_THRESHOLD;
use mvbridge_core::{CoeffFn, GeneralModelParams, ModelSpec, PowerMeanParams, SecondMomentParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub ode: OdeSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Option<String>,
    pub alpha: Option<f64>,
    pub x0: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub mu: Option<String>,
    pub sigma: Option<String>,
    pub phi1: Option<String>,
    pub phi2: Option<String>,
    /// Constant bound on `σ²`.
    pub envelope: Option<f64>,
    /// Tabulated `φ1` as `[x, y]` pairs; overrides `phi1`.
    pub phi1_table: Option<Vec<[f64; 2]>>,
    pub phi2_table: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: Option<usize>,
    pub steps: Option<usize>,
    /// Distance of the last grid point from `T`, as a fraction of `T`.
    pub truncation: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub scheme: Option<String>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub substeps: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    /// Name prefixes of the checks to keep; empty keeps all.
    pub checks: Option<Vec<String>>,
    pub z_threshold: Option<f64>,
    pub inject_bias: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSection {
    pub tol: Option<f64>,
    pub quad_order: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: Option<String>,
    pub quantity: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSettings {
    pub points: usize,
    pub steps: usize,
    pub truncation_eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSettings {
    pub scheme: Scheme,
    pub paths: usize,
    pub seed: u64,
    pub substeps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSettings {
    pub checks: Vec<String>,
    pub z_threshold: f64,
    pub inject_bias: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OdeSettingsOut {
    pub tol: f64,
    pub quad_order: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputSettings {
    pub format: OutputFormat,
    pub quantity: Quantity,
}

/// Every value a command may read, with defaults filled in. Output paths are
/// left out so that the same experiment written elsewhere hashes identically.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub command: String,
    pub model: ModelSpec,
    pub grid: GridSettings,
    pub simulation: SimulationSettings,
    pub validation: ValidationSettings,
    pub ode: OdeSettingsOut,
    pub output: OutputSettings,
}

impl ResolvedConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("resolved config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn parse<T: std::str::FromStr<Err = mvbridge_core::Error>>(s: &str) -> Result<T, CliError> {
    s.parse::<T>().map_err(CliError::from)
}

fn table_phi(rows: &[[f64; 2]]) -> Result<PhiFn, CliError> {
    let xs = rows.iter().map(|r| r[0]).collect();
    let ys = rows.iter().map(|r| r[1]).collect();
    Ok(PhiFn::tabulated(xs, ys)?)
}

pub fn build_model(m: &ModelSection) -> Result<ModelSpec, CliError> {
    let family = m.family.as_deref().unwrap_or("power-mean");
    let horizon = m.horizon.unwrap_or(1.0);
    let alpha = m.alpha.unwrap_or(1.0);
    let model = match family {
        "power-mean" => ModelSpec::PowerMean(PowerMeanParams {
            alpha,
            x0: m.x0.unwrap_or(1.0),
            horizon,
        }),
        "second-moment" => ModelSpec::PowerSecondMoment(SecondMomentParams {
            alpha,
            x0: m.x0.unwrap_or(0.0),
            horizon,
        }),
        "brownian-bridge" => ModelSpec::ReferenceBrownianBridge {
            x0: m.x0.unwrap_or(1.0),
            horizon,
        },
        "general" => {
            let mut p = GeneralModelParams::example(m.x0.unwrap_or(0.0), horizon);
            if let Some(s) = &m.mu {
                p.mu = parse::<CoeffFn>(s)?;
            }
            if let Some(s) = &m.sigma {
                p.sigma = parse::<CoeffFn>(s)?;
            }
            if let Some(s) = &m.phi1 {
                p.phi1 = parse::<PhiFn>(s)?;
            }
            if let Some(s) = &m.phi2 {
                p.phi2 = parse::<PhiFn>(s)?;
            }
            if let Some(rows) = &m.phi1_table {
                p.phi1 = table_phi(rows)?;
            }
            if let Some(rows) = &m.phi2_table {
                p.phi2 = table_phi(rows)?;
            }
            if let Some(h) = m.envelope {
                p.sigma_envelope = EnvelopeFn::Constant { value: h };
            }
            ModelSpec::General(p)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown model family '{other}' (expected power-mean, second-moment, general or brownian-bridge)"
            )))
        }
    };
    model.validate()?;
    Ok(model)
}

/// Exact sampling where the family has one, frozen Euler otherwise.
pub fn default_scheme(model: &ModelSpec) -> Scheme {
    match model {
        ModelSpec::PowerMean(_) | ModelSpec::ReferenceBrownianBridge { .. } => Scheme::ExactGaussian,
        ModelSpec::PowerSecondMoment(p) if p.is_explicit() => Scheme::ExactGaussian,
        _ => Scheme::FrozenEuler,
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, CliError> {
    parse::<Scheme>(s)
}

fn parse_format(s: &str) -> Result<OutputFormat, CliError> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "binary" | "bin" => Ok(OutputFormat::Binary),
        other => Err(CliError::Usage(format!("unknown output format '{other}' (expected csv or binary)"))),
    }
}

/// Merges file and flag values (flags win) and fills in defaults.
pub fn resolve(command: &str, file: FileConfig) -> Result<ResolvedConfig, CliError> {
    let model = build_model(&file.model)?;
    let horizon = model.horizon();
    let truncation = file.grid.truncation.unwrap_or(DEFAULT_TRUNCATION);
    if !(truncation > 0.0 && truncation < 1.0) {
        return Err(CliError::Usage(format!("grid truncation = {truncation} must lie in (0, 1)")));
    }
    let scheme = match &file.simulation.scheme {
        Some(s) => parse_scheme(s)?,
        None => default_scheme(&model),
    };
    let quantity = match &file.output.quantity {
        Some(q) => parse::<Quantity>(q)?,
        None => default_quantity(&model),
    };
    let format = match &file.output.format {
        Some(f) => parse_format(f)?,
        None => OutputFormat::Csv,
    };
    let z_threshold = file.validation.z_threshold.unwrap_or(DEFAULT_Z_THRESHOLD);
    if !(z_threshold > 0.0 && z_threshold.is_finite()) {
        return Err(CliError::Usage(format!("z_threshold = {z_threshold} must be > 0")));
    }
    let tol = file.ode.tol.unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Usage(format!("tol = {tol} must be > 0")));
    }
    let (default_paths, default_steps) = match command {
        "validate" => (100_000, 1024),
        "plotdata" => (10_000, 1024),
        _ => (1000, 100),
    };
    Ok(ResolvedConfig {
        command: command.to_string(),
        grid: GridSettings {
            points: file.grid.points.unwrap_or(101),
            steps: file.grid.steps.unwrap_or(default_steps),
            truncation_eps: truncation * horizon,
        },
        simulation: SimulationSettings {
            scheme,
            paths: file.simulation.paths.unwrap_or(default_paths),
            seed: file.simulation.seed.unwrap_or(42),
            substeps: file.simulation.substeps.unwrap_or(1),
        },
        validation: ValidationSettings {
            checks: file.validation.checks.unwrap_or_default(),
            z_threshold,
            inject_bias: file.validation.inject_bias.unwrap_or(0.0),
        },
        ode: OdeSettingsOut {
            tol,
            quad_order: file.ode.quad_order.unwrap_or(DEFAULT_HERMITE_ORDER),
        },
        output: OutputSettings { format, quantity },
        model,
    })
}
