//! Experiment runner: generate data, train transport maps, compute
//! reference chains, evaluate checkpoints, and dump analytic maps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort,
//! 4 I/O failure.

use clap::{Parser, Subcommand};
use mgan::cli;
use mgan::config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mgan", about = "Monotone transport maps trained adversarially", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset (CSV + binary + manifest).
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train on a dataset; writes history.csv and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset file (.bin or .csv); defaults to <out>/dataset.bin.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate saved checkpoints against oracles or reference chains.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint root; defaults to <out>/checkpoints.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Run reference Metropolis chains for the inference problems.
    Mcmc {
        #[command(flatten)]
        common: Common,
    },
    /// Dump the analytic transport map on a grid.
    KrOracle {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override every stage seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(common: &Common) -> mgan::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn run(args: Args) -> mgan::Result<()> {
    match &args.command {
        Command::Generate { common } => cli::cmd_generate(&load(common)?),
        Command::Train { common, dataset } => cli::cmd_train(&load(common)?, dataset.as_deref()),
        Command::Evaluate { common, checkpoints } => {
            cli::cmd_evaluate(&load(common)?, checkpoints.as_deref())
        }
        Command::Mcmc { common } => cli::cmd_mcmc(&load(common)?),
        Command::KrOracle { common } => cli::cmd_kr_oracle(&load(common)?),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
