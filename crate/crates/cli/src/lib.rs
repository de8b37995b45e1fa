//! Command-line front end for the `coulomb-tmat` library.
//!
//! Exit codes: 0 success, 1 bad configuration, 2 a gating check failed (or
//! warnings under `--strict`), 3 numerical or i/o failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use config::{Command, Overrides, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tmat", version, about = "Separable Coulomb T-matrix runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Orthonormality audit of the momentum basis.
    BasisCheck(#[command(flatten)] Overrides),
    /// Convergence of the separable expansion of the potential.
    PotentialConverge(#[command(flatten)] Overrides),
    /// Truncated tau matrix for one partial wave.
    Tau(#[command(flatten)] Overrides),
    /// Bound-state poles of the diagonal tau.
    PoleScan(#[command(flatten)] Overrides),
}

impl Sub {
    fn split(self) -> (Command, Overrides) {
        match self {
            Sub::BasisCheck(o) => (Command::BasisCheck, o),
            Sub::PotentialConverge(o) => (Command::PotentialConverge, o),
            Sub::Tau(o) => (Command::Tau, o),
            Sub::PoleScan(o) => (Command::PoleScan, o),
        }
    }
}

/// Resolves flags over the optional config file.
pub fn resolve(command: Command, flags: &Overrides) -> Result<RunConfig, CliError> {
    let base = match &flags.config {
        Some(path) => Overrides::from_file(path)?,
        None => Overrides::default(),
    };
    RunConfig::resolve(command, &base.layered(flags))
}

fn execute(command: Command, flags: &Overrides) -> Result<i32, CliError> {
    let cfg = resolve(command, flags)?;
    let report = commands::run(&cfg)?;
    report.emit(&cfg)?;
    eprint!("{}", report.summary());
    Ok(report.exit_code(cfg.strict))
}

/// Runs the CLI and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (command, flags) = cli.command.split();
    match execute(command, &flags) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
