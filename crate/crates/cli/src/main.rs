//! `sojourn`: command-line front end for the excursion-volume toolkit.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "sojourn", version, about = "Excursion volumes of subordinated Gaussian random fields")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// JSON config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "sojourn-out")]
    pub out: PathBuf,
    /// Master seed (overrides the config)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write SVG histogram and QQ plots
    #[arg(long, global = true)]
    pub plot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hermite coefficient a_k or Hermite rank of 1{f(σx) ≥ u}
    Hermite(HermiteArgs),
    /// Normalization σ²_{n,m} of a window
    Sigma(SigmaArgs),
    /// Evaluate a dependence condition (exit 0 satisfied, 1 violated, 4 inconclusive)
    Check(CheckArgs),
    /// Run a Monte Carlo experiment from a config (exit 0 pass, 1 threshold failure)
    Experiment(ExperimentArgs),
    /// Anisotropic fractional Gaussian noise experiment
    Fgn(FgnArgs),
    /// Draw from the Hermite oracle (Rosenblatt law for m = 2)
    Rosenblatt(RosenblattArgs),
    /// Random-volatility experiment
    Volatility(VolatilityArgs),
}

#[derive(Debug, Args)]
pub struct HermiteArgs {
    /// Subordinator: identity, square, lognormal, cubic:β, quadratic:a, signed_exp:β, or JSON
    #[arg(long = "f")]
    pub f: String,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub u: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Coefficient order
    #[arg(long, conflicts_with = "rank", required_unless_present = "rank")]
    pub k: Option<usize>,
    /// Report the Hermite rank instead
    #[arg(long)]
    pub rank: bool,
}

#[derive(Debug, Args)]
pub struct SigmaArgs {
    /// Covariance model as JSON, e.g. '{"kind":"power_law_iso","eta":0.4}'
    #[arg(long)]
    pub model: String,
    /// Window extents, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    pub extents: Vec<f64>,
    /// Lattice mesh (one value or one per axis)
    #[arg(long, value_delimiter = ',')]
    pub mesh: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// quadrature, lattice_sum, closed_form_fgn or asymptotic_example27
    #[arg(long, default_value = "quadrature")]
    pub method: String,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Check config (alternative to --config)
    pub path: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config (alternative to --config)
    pub path: Option<PathBuf>,
    /// Override the replicate count
    #[arg(long)]
    pub replicates: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FgnArgs {
    #[arg(long, value_delimiter = ',')]
    pub hurst: Vec<f64>,
    /// Growth exponents (default: automatic)
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub level: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub ladder: Vec<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Most lattice nodes per axis
    #[arg(long)]
    pub axis_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RosenblattArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Exponents γ_l of the product density ∏|z_l|^{γ_l − 1}
    #[arg(long, value_delimiter = ',', default_value = "0.4")]
    pub gammas: Vec<f64>,
    /// Spectral density as JSON (overrides --gammas)
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long, value_enum, default_value_t = Shape::Box)]
    pub shape: Shape,
    /// Frequency cells per axis
    #[arg(long, default_value_t = 4096)]
    pub cells: usize,
    /// Truncation radius per axis
    #[arg(long, default_value_t = 200.0)]
    pub truncation: f64,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Box,
    Ball,
}

#[derive(Debug, Args)]
pub struct VolatilityArgs {
    /// Volatility config (alternative to --config)
    pub path: Option<PathBuf>,
    #[arg(long)]
    pub replicates: Option<usize>,
}

/// Exit statuses shared by all subcommands.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or a config that violates the schema.
    Usage(String),
    /// Numerical or runtime failure.
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<sojourn::Error> for Failure {
    fn from(e: sojourn::Error) -> Self {
        match e {
            sojourn::Error::InvalidParameter(_) | sojourn::Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) | Failure::Runtime(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
