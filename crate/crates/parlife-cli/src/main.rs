//! `parlife`: valuation, barrier, optimization and sensitivity runs for a
//! life insurer selling participating contracts.
//!
//! Exit codes: 0 success, 1 failed check or reference row, 2 configuration
//! error, 3 numeric failure (including fewer than 90% of rows computed).

mod checks;
mod commands;
mod config;
mod error;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Report;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "parlife", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed of the Monte Carlo streams; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Coarser grids and fewer paths with widened tolerances.
    #[arg(long, global = true)]
    fast: bool,

    /// `key=value` override, applied after the file. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Firm value, equity, liability and their parts.
    Price,
    /// Bankruptcy barrier with the assumption diagnostics.
    SolveVb,
    /// Optimal participation and guarantee rates (`mode`).
    Optimize,
    /// One-dimensional sweep (`sweep`, `axis`, `grid`).
    Sweep,
    /// Positivity of an optimal rate over a two-dimensional grid.
    Regions,
    /// Volatility sensitivities of equity and liability.
    AssetSub,
    /// Assumption, closed-form, quadrature and Monte Carlo checks.
    Validate,
    /// The reference case next to its published values.
    ReproducePaper,
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Price => commands::price(&cfg),
        Command::SolveVb => commands::solve_barrier(&cfg),
        Command::Optimize => commands::optimize(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Regions => commands::regions(&cfg),
        Command::AssetSub => commands::asset_sub(&cfg),
        Command::Validate => checks::validate(&cfg, cli.fast),
        Command::ReproducePaper => checks::reproduce(cli.fast),
    }
}

fn emit(report: &Report, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            report.table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => report.table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|report| {
        emit(&report, cli.out.as_ref())?;
        Ok(report.status)
    });
    match result {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("parlife: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
