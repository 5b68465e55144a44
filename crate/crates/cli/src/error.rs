use std::path::PathBuf;

use co2risk_core::pipeline::PipelineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("run directory {} not found or incomplete: {reason}", path.display())]
    MissingRunDir { path: PathBuf, reason: String },
    #[error("{0}")]
    Simulation(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    /// Short error class printed on failure.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::MissingRunDir { .. } => "missing-run-dir",
            CliError::Simulation(_) => "simulation",
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::MissingRunDir { .. } => 4,
            CliError::Simulation(_) => 5,
            CliError::Io { .. } => 6,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config { .. } => CliError::Config(e.to_string()),
            PipelineError::Io(source) => CliError::Io { context: "writing results".into(), source },
            other => CliError::Simulation(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
