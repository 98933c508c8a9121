//! `qportfolio`: reproducible restart, histogram, training and amplification
//! experiments. Every command writes its output atomically together with a
//! run manifest that `qportfolio replay` can re-execute.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

const EXIT_INPUT: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "qportfolio",
    version,
    about = "Restart strategies and portfolios of quantum SAT heuristics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "parameters", rename_all = "lowercase")]
pub enum Command {
    /// Mean/variance frontier of restart strategies as CSV.
    Frontier(FrontierArgs),
    /// Random 3-SAT instances as DIMACS files.
    Gen(GenArgs),
    /// Per-choice success probabilities and single/mixed statistics.
    Histogram(HistogramArgs),
    /// Train a portfolio of phase choices.
    Optimize(OptimizeArgs),
    /// Evaluate portfolios on held-out instances.
    Eval(EvalArgs),
    /// Amplitude-amplify a portfolio on one instance.
    Amplify(AmplifyArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FrontierArgs {
    /// Solution fraction S/N, in (0, 1/2].
    #[arg(long)]
    pub fraction: f64,
    /// Largest iteration count; defaults to the certainty count.
    #[arg(long)]
    pub t_max: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = qportfolio::sat::HARD_RATIO)]
    pub ratio: f64,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HistogramArgs {
    /// A DIMACS file or a directory of `.cnf` files.
    #[arg(long, conflicts_with = "n", required_unless_present = "n")]
    pub instances: Option<PathBuf>,
    /// Generate solvable instances of this size instead of reading files.
    #[arg(long)]
    pub n: Option<usize>,
    /// Instances to generate with `--n`.
    #[arg(long, default_value_t = 2)]
    pub count: usize,
    #[arg(long, default_value_t = qportfolio::sat::HARD_RATIO)]
    pub ratio: f64,
    /// Number of random phase choices.
    #[arg(
        long,
        conflicts_with = "portfolio",
        required_unless_present = "portfolio"
    )]
    pub choices: Option<usize>,
    /// Portfolio JSON to use instead of random choices.
    #[arg(long)]
    pub portfolio: Option<PathBuf>,
    /// Trial length; defaults to each instance's variable count.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    /// Training instance size.
    #[arg(long)]
    pub n: usize,
    /// Training instances.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = qportfolio::sat::HARD_RATIO)]
    pub ratio: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Objective evaluations per restart.
    #[arg(long, default_value_t = 500)]
    pub budget: usize,
    /// Trial length; defaults to `n`.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Portfolio JSON; repeat to compare several on the same instances.
    #[arg(long, required = true)]
    pub portfolio: Vec<PathBuf>,
    /// Test instance size.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Solvable test instances.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = qportfolio::sat::HARD_RATIO)]
    pub ratio: f64,
    #[arg(long)]
    pub seed: u64,
    /// Trial length on the test instances; defaults to `n`.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AmplifyArgs {
    /// DIMACS instance.
    #[arg(long, conflicts_with = "n", required_unless_present = "n")]
    pub instance: Option<PathBuf>,
    /// Generate a solvable instance of this size instead.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = qportfolio::sat::HARD_RATIO)]
    pub ratio: f64,
    #[arg(long, conflicts_with = "choices", required_unless_present = "choices")]
    pub portfolio: Option<PathBuf>,
    /// Number of random phase choices, superposed with equal weights.
    #[arg(long)]
    pub choices: Option<usize>,
    /// Trial length; defaults to the instance's variable count.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Amplification rounds.
    #[arg(long)]
    pub rounds: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let infeasible = err
        .chain()
        .filter_map(|e| e.downcast_ref::<qportfolio::Error>())
        .any(qportfolio::Error::is_infeasible);
    if infeasible {
        EXIT_INFEASIBLE
    } else {
        EXIT_INPUT
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
