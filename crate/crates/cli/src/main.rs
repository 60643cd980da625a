mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linbarrier::Error;

/// Safe control of second-order systems under piecewise-linear position
/// constraints.
#[derive(Debug, Parser)]
#[command(name = "linbarrier", version)]
pub struct Cli {
    /// Seed for boundary sampling. Overrides the scenario's seed when given.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Also write SVG figures.
    #[arg(long, global = true)]
    pub plot: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the extended barrier for a spec and print its certificate.
    Construct(ConstructArgs),
    /// Check the safety condition on sampled boundary states.
    Verify(VerifyArgs),
    /// Run a scenario and audit the trajectory.
    Simulate(SimulateArgs),
    /// Rerun a scenario over a list of parameter values.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Pick gamma and epsilon from the input bound `--d`.
    #[arg(long, requires = "d", conflicts_with_all = ["gamma", "epsilon"])]
    pub auto: bool,
    /// Radius of the admissible input ball.
    #[arg(long)]
    pub d: Option<f64>,
    /// Scenario whose plant is used by `--auto` (default: the two-link arm
    /// without gravity).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Grid points per axis for the plant constants.
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Spec file with a `cbf` block, as written by `construct`.
    pub cbf: PathBuf,
    /// Scenario supplying the plant and input set.
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepParam {
    Gamma,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value = "gamma")]
    pub param: SweepParam,
    /// Comma-separated values; epsilon follows as gamma * delta / 2.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Vec<f64>,
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_PARAMETER: u8 = 2;
pub const EXIT_GEOMETRY: u8 = 3;
pub const EXIT_CONDITION: u8 = 4;
pub const EXIT_RUNTIME: u8 = 5;
pub const EXIT_USAGE: u8 = 64;

/// Failure of a subcommand, carrying its exit status.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e.to_string()))
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ParameterViolation { .. }
        | Error::InsufficientActuation { .. }
        | Error::Validation(_)
        | Error::DimensionMismatch { .. }
        | Error::NotPositiveDefinite
        | Error::NoSplit => EXIT_PARAMETER,
        Error::UnboundedPositions { .. }
        | Error::EmptySet
        | Error::AssumptionViolated { .. }
        | Error::TooManyHalfspaces { .. }
        | Error::NotInC { .. } => EXIT_GEOMETRY,
        Error::ConditionFailed { .. } => EXIT_CONDITION,
        Error::QpInfeasibleAt { .. }
        | Error::Infeasible
        | Error::NonFinite { .. }
        | Error::OutsideNeighborhood { .. }
        | Error::NumericalBreakdown(_)
        | Error::SingularInertia { .. }
        | Error::NotRightInvertible { .. }
        | Error::Internal(_) => EXIT_RUNTIME,
        Error::Io(_) => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
