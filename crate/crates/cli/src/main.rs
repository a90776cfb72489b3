//! `prefxfer`: learn preference weights from a canonical-task demonstration,
//! anticipate actions in the actual task, and run simulated evaluations.

mod commands;
mod corpus;
mod render;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prefxfer_core::sim::{ArchetypeMix, DemoPolicy};

#[derive(Debug, Parser)]
#[command(name = "prefxfer", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn weights from one canonical-task demonstration.
    Learn(LearnArgs),
    /// Plan in a task under learned weights, optionally scoring a trace.
    Predict(PredictArgs),
    /// Write simulated users' ratings and demonstrations to a directory.
    Simulate(SimulateArgs),
    /// Compare the learned model against both random baselines.
    Evaluate(EvaluateArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    /// The artifact itself (JSON or TOML) on stdout.
    Machine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StepDirection {
    Newton,
    Gradient,
}

#[derive(Debug, Args)]
struct OptimizerArgs {
    /// Ascent direction for weight learning.
    #[arg(long, value_enum, default_value_t = StepDirection::Newton)]
    direction: StepDirection,
    /// Initial learning rate (gradient direction only).
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Convergence threshold on the feature-count gap (max norm).
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct LearnArgs {
    /// Task file (defaults to the built-in canonical task).
    #[arg(long)]
    task: Option<PathBuf>,
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    opt: OptimizerArgs,
    /// Start from seeded random weights instead of zero.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the weights file here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Task file (defaults to the built-in actual task).
    #[arg(long)]
    task: Option<PathBuf>,
    #[arg(long)]
    ratings: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Score predictions against this demonstration.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the prediction report here (requires --trace).
    #[arg(long, requires = "trace")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct PopulationArgs {
    /// Number of simulated users.
    #[arg(long, default_value_t = 50)]
    users: usize,
    /// Archetype proportions, e.g. `part-chainer=0.5,mixed=0.5`.
    #[arg(long, value_parser = parse_mix)]
    mix: Option<ArchetypeMix>,
    /// How simulated users demonstrate: `greedy` or `softmax:BETA`.
    #[arg(long, value_parser = parse_policy, default_value = "greedy")]
    policy: DemoPolicy,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    population: PopulationArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    population: PopulationArgs,
    /// Evaluate recorded ratings and traces in this directory instead of
    /// simulated users.
    #[arg(long, conflicts_with_all = ["users", "mix", "policy"])]
    corpus: Option<PathBuf>,
    #[arg(long)]
    canonical_task: Option<PathBuf>,
    #[arg(long)]
    actual_task: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo trials per user for each random baseline.
    #[arg(long, default_value_t = prefxfer_core::eval::DEFAULT_TRIALS)]
    trials: usize,
    #[command(flatten)]
    opt: OptimizerArgs,
    /// Write the results JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Periodically write every session's export here.
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// Seconds between snapshots.
    #[arg(long, default_value_t = 30)]
    snapshot_interval: u64,
    /// Log anticipations without showing them to participants.
    #[arg(long)]
    hide_anticipation: bool,
}

fn parse_mix(s: &str) -> Result<ArchetypeMix, String> {
    s.parse().map_err(|e: prefxfer_core::Error| e.to_string())
}

fn parse_policy(s: &str) -> Result<DemoPolicy, String> {
    if s == "greedy" {
        return Ok(DemoPolicy::Greedy);
    }
    let beta = s
        .strip_prefix("softmax:")
        .and_then(|b| b.parse::<f64>().ok())
        .filter(|b| b.is_finite() && *b > 0.0)
        .ok_or_else(|| format!("`{s}` is not `greedy` or `softmax:BETA` with BETA > 0"))?;
    Ok(DemoPolicy::Softmax { beta })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Learn(a) => commands::learn(a),
        Command::Predict(a) => commands::predict(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
