//! `usbs`: solve, round and perturb MaxCut and QAP semidefinite relaxations.
//!
//! Exit codes: 0 converged, 1 solver or I/O error, 2 budget exhausted,
//! 64 usage error, 65 state or mapping does not fit the instance.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Overrides;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Solver(usbs::Error),
}

impl From<usbs::Error> for CliError {
    fn from(e: usbs::Error) -> Self {
        match e {
            usbs::Error::FingerprintMismatch(_) | usbs::Error::StateFormat(_) | usbs::Error::Mapping(_) => {
                CliError::Data(e.to_string())
            }
            e => CliError::Solver(e),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Data(_) => 65,
            CliError::Solver(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
            CliError::Solver(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    Maxcut,
    Qap,
}

#[derive(Parser)]
#[command(name = "usbs", version, about = "Spectral bundle SDP solver for MaxCut and QAP relaxations")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the relaxation and write per-iteration metrics as CSV.
    Solve(SolveArgs),
    /// Round a saved solver state to a cut or permutation.
    Round(RoundArgs),
    /// Derive a smaller instance and the mapping used to warm-start from it.
    Perturb(PerturbArgs),
}

#[derive(Args)]
pub struct Instance {
    #[arg(long, value_enum)]
    pub problem: ProblemArg,
    /// MatrixMarket graph (maxcut) or QAPLIB file (qap).
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: Instance,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub kc: Option<usize>,
    #[arg(long)]
    pub kp: Option<usize>,
    /// Nyström sketch rank; 0 stores the aggregate densely.
    #[arg(long)]
    pub sketch_rank: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub max_time: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also require the ℓ∞ infeasibility to fall below eps.
    #[arg(long)]
    pub linf: bool,
    /// key=value settings, overridden by flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Index mapping from the warm-start instance into this one.
    #[arg(long, requires = "warm_start")]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub save_state: Option<PathBuf>,
    /// Round the primal iterate every iteration.
    #[arg(long)]
    pub round: bool,
    /// Known optimum of a QAP instance, for relative gaps.
    #[arg(long)]
    pub optimum: Option<f64>,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SolveArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            rho: self.rho,
            beta: self.beta,
            kc: self.kc,
            kp: self.kp,
            sketch_rank: self.sketch_rank,
            eps: self.eps,
            max_iters: self.max_iters,
            max_time: self.max_time,
            seed: self.seed,
            linf: self.linf.then_some(true),
        }
    }
}

#[derive(Args)]
pub struct RoundArgs {
    #[command(flatten)]
    pub instance: Instance,
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub optimum: Option<f64>,
}

#[derive(Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub instance: Instance,
    /// Fraction of trailing vertices to drop (maxcut).
    #[arg(long, default_value_t = 0.01)]
    pub fraction: f64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub mapping: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Command::Solve(a) => commands::solve(&a),
        Command::Round(a) => commands::round(&a).map(|_| 0),
        Command::Perturb(a) => commands::perturb(&a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("usbs: {e}");
            ExitCode::from(e.code())
        }
    }
}
