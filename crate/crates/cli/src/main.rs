use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use debias_cli::prepare::{default_data_dir, prepare, DatasetName};
use debias_cli::runner::run;

/// Label-bias correction by example re-weighting.
#[derive(Parser)]
#[command(name = "debias", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convert a benchmark dataset to CSV and write a default config.
    Prepare {
        #[arg(long, value_enum)]
        dataset: DatasetName,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, seed } => {
            let report = run(&config, seed).with_context(|| format!("running {}", config.display()))?;
            print!("{}", report.render());
        }
        Command::Prepare { dataset, out } => {
            let data_dir = default_data_dir();
            let prepared = prepare(dataset, &out, &data_dir)
                .with_context(|| format!("preparing {}", dataset.as_str()))?;
            println!("{}\n{}", prepared.csv_path.display(), prepared.config_path.display());
        }
    }
    Ok(())
}
