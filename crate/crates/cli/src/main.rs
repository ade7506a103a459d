use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;
mod settings;

/// First-passage times of the Feller square-root diffusion: cumulants,
/// Laguerre-Gamma density approximation and Monte Carlo validation.
#[derive(Parser, Debug)]
#[command(name = "feller-fpt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cumulants c1..cK and moments m1..mK of the first-passage time.
    Cumulants(CumulantsArgs),
    /// Moment-matched Laguerre-Gamma density table(s).
    Approx(ApproxArgs),
    /// Milstein Monte Carlo sample and empirical density.
    Simulate(SimulateArgs),
    /// Pointwise error between an approximant table and an empirical table.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Flat key=value parameter file ('#' comments); flags override it.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Lower endpoint of the state space (c ≤ 0).
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub y0: Option<f64>,
    /// Threshold S.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[arg(long)]
    pub grid_min: Option<f64>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CumulantsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Number of cumulants K [default: 5].
    #[arg(long)]
    pub order: Option<usize>,
    /// Relative stopping tolerance of the series.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Term cap of the series.
    #[arg(long)]
    pub max_terms: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Truncation degree(s) n ≥ 2, comma separated [default: 5].
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Set negative density values to zero (no renormalization).
    #[arg(long)]
    pub clip: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Number of paths [default: 10000].
    #[arg(long)]
    pub paths: Option<usize>,
    /// Time step [default: 0.01].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Censoring horizon [default: 20·E[T]].
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// histogram | gaussian-kde [default: gaussian-kde].
    #[arg(long)]
    pub estimator: Option<String>,
    /// silverman | <width> [default: silverman].
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Worker threads [default: all cores]; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Approximant table (CSV or JSON).
    #[arg(long)]
    pub approx: PathBuf,
    /// Empirical table (CSV or JSON).
    #[arg(long)]
    pub empirical: PathBuf,
    /// Sup error is taken over t ≥ t_cut [default: 2·dt of the simulation, else 0].
    #[arg(long)]
    pub t_cut: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Failure classes, one per exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Errors from validating inputs.
    pub fn input(e: feller_fpt::FptError) -> Self {
        match e {
            feller_fpt::FptError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }

    /// Errors from the computation proper.
    pub fn compute(e: feller_fpt::FptError) -> Self {
        match e {
            feller_fpt::FptError::Io { .. } => CliError::Io(e.to_string()),
            feller_fpt::FptError::InvalidParams { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cumulants(a) => commands::cumulants(a),
        Command::Approx(a) => commands::approx(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Compare(a) => commands::compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
