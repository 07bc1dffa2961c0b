use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod manifest;

#[derive(Debug, Parser)]
#[command(name = "ammfeelab", version, about = "Simulate constant-product AMM pools under fixed and directional fee policies")]
pub struct Cli {
    /// TOML configuration file; every key has a default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed, overriding `simulation.master_seed` and `sweep.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Override a config key, e.g. `--set simulation.alpha=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured synthetic price paths as CSV files.
    Generate,
    /// Simulate every path under one or more fee policies.
    Run {
        /// Comma-separated policies (fx, ba, da, ob) with default
        /// parameters; without it the configured `fee_policy` runs alone.
        #[arg(long, value_delimiter = ',')]
        policies: Vec<String>,
        /// Summary printed to stdout.
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
    /// Expected LP fee revenue of one trade across a grid of fees.
    Sweep,
    /// Merge results CSVs into one comparison table.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("ammfeelab: {err}");
            err.exit_code()
        }
    }
}
