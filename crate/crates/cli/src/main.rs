// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod tasks;

use config::{ExperimentConfig, TaskKind};
use tasks::Failure;

/// Markovian reductions of stochastic delay equations: projections,
/// simulations, error scans, option prices and policy costs from a TOML
/// experiment file.
#[derive(Parser)]
#[command(name = "sdde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Fourier–Laguerre coefficients and cumulative tails of the kernels.
    Project(TaskArgs),
    /// One oracle path and one chain path on shared noise.
    Simulate(TaskArgs),
    /// Monte Carlo truncation error over `task.n_list`.
    ErrorScan(TaskArgs),
    /// Least-squares Monte Carlo value of a stopping problem on the chain.
    Price(TaskArgs),
    /// Monte Carlo cost of a feedback policy, chain against oracle.
    ControlEval(TaskArgs),
    /// Tabulate the Laguerre basis functions.
    Basis(TaskArgs),
    /// Run the task named by `task.kind` in the config.
    Run(TaskArgs),
}

#[derive(Args)]
struct TaskArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override `simulation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output.directory` and $SDDE_OUTPUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let (kind, args) = match cli.command {
        Command::Project(a) => (Some(TaskKind::Project), a),
        Command::Simulate(a) => (Some(TaskKind::Simulate), a),
        Command::ErrorScan(a) => (Some(TaskKind::ErrorScan), a),
        Command::Price(a) => (Some(TaskKind::Price), a),
        Command::ControlEval(a) => (Some(TaskKind::ControlEval), a),
        Command::Basis(a) => (Some(TaskKind::Basis), a),
        Command::Run(a) => (None, a),
    };
    match execute(kind, args) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(kind: Option<TaskKind>, args: TaskArgs) -> Result<Vec<String>, Failure> {
    let mut cfg = ExperimentConfig::from_file(&args.config).map_err(Failure::Config)?;
    let kind = kind
        .or(cfg.task.kind)
        .ok_or_else(|| Failure::Config(anyhow::anyhow!("task.kind: `run` needs a task kind in the config")))?;
    cfg.task.kind = Some(kind);
    if let Some(seed) = args.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(dir) = args.out {
        cfg.output.directory = Some(dir);
    }
    log::info!("running {} with config digest {}", kind.name(), cfg.digest());
    tasks::run(&cfg, kind)
}
