use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use co2risk_core::pipeline::Preset;

/// Dynamic CO2 leakage-risk assessment workbench.
#[derive(Debug, Parser)]
#[command(name = "co2risk", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the prior permeability ensemble.
    Priors(RunArgs),
    /// Simulate the hidden truth and sample its noisy observations.
    Truth(RunArgs),
    /// Assimilate the monitoring data once into the prior ensemble.
    Assimilate(RunArgs),
    /// Run the full dynamic risk-assessment loop.
    Assess(RunArgs),
    /// Run a sweep of scenarios and compare their bands.
    Suite(RunArgs),
    /// Re-emit band CSVs from a finished run directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML (or `.json`) file with overrides of the preset.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory; defaults to `<CO2RISK_OUT>/<command>-<scenario>-seed<seed>`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Base preset, overriding the config's `preset` key.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    /// Use the preset's full grid and ensemble instead of the desk scale.
    #[arg(long)]
    pub full: bool,
    /// Worker threads for ensemble runs; all cores when omitted.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Root directory for default run directories.
    #[arg(long, env = "CO2RISK_OUT", default_value = "runs", hide_env_values = true)]
    pub out_root: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Run directory written by `assess` or `suite`.
    pub run_dir: PathBuf,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    match s.parse::<Preset>()? {
        Preset::Custom => Err("preset must be example1 or rsu".into()),
        p => Ok(p),
    }
}
