//! Experiment front end for the streaming replay engine.

mod artifacts;
mod report;
mod runner;
mod runspec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use runspec::UsageError;

#[derive(Parser)]
#[command(
    name = "protoreplay",
    about = "Run and compare continual-regression experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a grid of experiments and write artifacts.
    Run(RunArgs),
    /// Render comparison tables from a results directory.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// JSON run spec; explicit flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV path or synthetic:<kind> with kind one of piecewise-drift,
    /// friedman-like, clusters.
    #[arg(long)]
    data: Option<String>,
    /// forgetting, clear or plain-stream.
    #[arg(long)]
    protocol: Option<String>,
    /// Synthetic share grid for prototype replay, e.g. 0.625,0.5,0.
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    /// prototype-replay, naive-incremental, experience-replay.
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<String>>,
    /// One full run per seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory (default: $PROTOREPLAY_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Target column name for CSV data.
    #[arg(long)]
    target: Option<String>,
    /// Synthetic sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Synthetic feature count.
    #[arg(long)]
    features: Option<usize>,
    /// Synthetic noise scale.
    #[arg(long)]
    noise: Option<f64>,
    /// Seed for the data generator (separate from engine seeds).
    #[arg(long)]
    data_seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding run manifests.
    #[arg(long = "in")]
    input: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => runner::cmd_run(args),
        Command::Report(args) => report::cmd_report(&args.input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
