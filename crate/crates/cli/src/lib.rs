//! Command-line workbench: configuration loading, run directories and
//! band emission around the dynamic risk-assessment pipeline.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod logging;
pub mod rundir;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;
use co2risk_core::pipeline::SharedContext;

use crate::cli::{Cli, Command};
pub use crate::error::{CliError, Result};

/// Parses `argv` and runs the command; returns the output directory.
pub fn run<I, T>(argv: I) -> Result<Option<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) => {
            print!("{e}");
            return Ok(None);
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ").to_string();
            return Err(CliError::Usage(first));
        }
    };
    logging::init();
    let threads = match &cli.command {
        Command::Report(_) => None,
        Command::Priors(a) | Command::Truth(a) | Command::Assimilate(a) | Command::Assess(a) | Command::Suite(a) => a.threads,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(format!("cannot start {threads:?} threads: {e}")))?;
    let ctx = SharedContext::new();
    let out = pool.install(|| match &cli.command {
        Command::Priors(a) => commands::priors(a),
        Command::Truth(a) => commands::truth(a, &ctx),
        Command::Assimilate(a) => commands::assimilate(a, &ctx),
        Command::Assess(a) => commands::assess(a, &ctx),
        Command::Suite(a) => commands::suite(a, &ctx),
        Command::Report(a) => commands::report(a),
    })?;
    Ok(Some(out))
}
