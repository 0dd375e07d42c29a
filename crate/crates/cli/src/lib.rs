//! `mvbridge`: tabulate, solve, simulate and validate bridge-type mean-field SDEs.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or domain error,
//! 3 validation failures.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::FileConfig;

#[derive(Debug)]
pub enum CliError {
    Core(mvbridge_core::Error),
    Usage(String),
    Io(std::io::Error),
    /// The validation report contains this many failed checks.
    ValidationFailed(usize),
}

impl From<mvbridge_core::Error> for CliError {
    fn from(e: mvbridge_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
            CliError::ValidationFailed(n) => write!(f, "{n} validation check(s) failed"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_user_error() => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::ValidationFailed(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "mvbridge", version, about = "Bridge-type McKean-Vlasov SDEs: closed forms, moment ODEs, simulation, validation")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Tabulate a moment curve as CSV `t,value,quantity,provenance`.
    Table(TableArgs),
    /// Solve the second-moment equation; CSV `t,eta` plus a JSON sidecar.
    Ode(OdeArgs),
    /// Simulate a path ensemble.
    Simulate(SimulateArgs),
    /// Run the statistical validation suite and write a JSON report.
    Validate(ValidateArgs),
    /// Write long-format plotting data into a directory.
    Plotdata(PlotArgs),
    #[command(hide = true)]
    Specfun {
        #[command(subcommand)]
        command: SpecfunCommand,
    },
}

#[derive(Subcommand)]
pub enum SpecfunCommand {
    /// Evaluate one special function at one point.
    Eval(SpecfunArgs),
}

#[derive(Args, Clone, Default)]
pub struct ModelArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// power-mean, second-moment, general or brownian-bridge.
    #[arg(long = "model", visible_alias = "family")]
    pub model: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// Terminal time.
    #[arg(long = "T", visible_alias = "horizon", allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    /// General family drift coefficient, e.g. `affine:1,1` or `power:1,2`.
    #[arg(long)]
    pub mu: Option<String>,
    /// General family diffusion coefficient.
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub phi1: Option<String>,
    #[arg(long)]
    pub phi2: Option<String>,
    /// Constant bound on the squared diffusion coefficient.
    #[arg(long)]
    pub envelope: Option<f64>,
    /// Last grid point sits at `T (1 - truncation)`.
    #[arg(long)]
    pub truncation: Option<f64>,
}

#[derive(Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub points: Option<usize>,
    /// mean, second_moment, g, g_prime, G, drift_coeff or bracket.
    #[arg(long)]
    pub quantity: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OdeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "grid-points", visible_alias = "points")]
    pub grid_points: Option<usize>,
    #[arg(long = "quad-order")]
    pub quad_order: Option<usize>,
    #[arg(long, default_value = "ode.csv")]
    pub out: PathBuf,
    /// Sidecar path; defaults to the output path with a `.json` extension.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// exact, frozen or particle.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Euler substeps per output interval.
    #[arg(long)]
    pub substeps: Option<usize>,
    /// csv or binary.
    #[arg(long)]
    pub format: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "z-threshold")]
    pub z_threshold: Option<f64>,
    /// Comma-separated check name prefixes to keep.
    #[arg(long, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    #[arg(long = "inject-bias", hide = true, allow_negative_numbers = true)]
    pub inject_bias: Option<f64>,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of sample paths written to `paths.csv`.
    #[arg(long = "sample-paths", default_value_t = 10)]
    pub sample_paths: usize,
    #[arg(long, default_value = "plotdata")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SpecfunArgs {
    /// bessel_i, bessel_k, lower_gamma, upper_gamma or a φ descriptor prefixed with `expect:`.
    #[arg(long = "fn")]
    pub function: String,
    /// Bessel order, gamma shape, or Gauss-Hermite order for expectations.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub order: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
}

impl ModelArgs {
    /// Reads the config file, if any, and applies the model flags on top.
    pub fn file_config(&self) -> Result<FileConfig, CliError> {
        let mut f = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let m = &mut f.model;
        set(&mut m.family, &self.model);
        set(&mut m.alpha, &self.alpha);
        set(&mut m.x0, &self.x0);
        set(&mut m.horizon, &self.horizon);
        set(&mut m.mu, &self.mu);
        set(&mut m.sigma, &self.sigma);
        if self.phi1.is_some() {
            m.phi1_table = None;
            set(&mut m.phi1, &self.phi1);
        }
        if self.phi2.is_some() {
            m.phi2_table = None;
            set(&mut m.phi2, &self.phi2);
        }
        set(&mut m.envelope, &self.envelope);
        set(&mut f.grid.truncation, &self.truncation);
        Ok(f)
    }
}

pub fn set<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if let Some(v) = flag {
        *slot = Some(v.clone());
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MVBRIDGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MVBRIDGE_THREADS = '{raw}' must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Table(a) => commands::table(&a),
        Command::Ode(a) => commands::ode(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::Plotdata(a) => commands::plotdata(&a),
        Command::Specfun {
            command: SpecfunCommand::Eval(a),
        } => commands::specfun_eval(&a),
    }
}

/// Parses the process arguments, runs the command and maps the outcome to an exit code.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
