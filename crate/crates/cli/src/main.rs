//! `cpc`: policy sweeps, per-state policy tables and coding simulations for
//! coded power control on the two-user interference channel.
//!
//! Exit status is 0 on success, 1 on usage or configuration errors and 2 when
//! the solver or the simulation fails.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use config::Settings;

#[derive(Debug, Parser)]
#[command(name = "cpc", version, about = "Coded power control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Flat TOML file with any of the flag names (underscored) as keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// FPC, SPC, OCPC and costless payoffs with relative gains over an SNR grid (CSV).
    Sweep(Common),
    /// Block-Markov coding simulation of a target law (JSON).
    Simulate(Common),
    /// Per-state optimal power pairs at one SNR (CSV).
    Policies(Common),
}

/// Error classified by exit status.
pub enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .with_context(|| format!("cannot create {}", p.display()))
                .map_err(Failure::Usage)?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (Command::Sweep(common) | Command::Simulate(common) | Command::Policies(common)) =
        &cli.command;
    let settings = Settings::resolve(common.config.as_ref(), common.settings.clone())
        .map_err(Failure::Usage)?;
    match &cli.command {
        Command::Sweep(_) => {
            let mut out = open_output(common.output.as_ref())?;
            commands::sweep(&settings, &mut out)?;
            out.flush().map_err(|e| Failure::Run(e.into()))
        }
        Command::Policies(_) => {
            let mut out = open_output(common.output.as_ref())?;
            commands::policies(&settings, &mut out)?;
            out.flush().map_err(|e| Failure::Run(e.into()))
        }
        Command::Simulate(_) => {
            // Simulate first so a failed run leaves no partial output file.
            let report = commands::simulate(&settings)?;
            let mut out = open_output(common.output.as_ref())?;
            commands::write_json(&report, &mut out)?;
            out.flush().map_err(|e| Failure::Run(e.into()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
