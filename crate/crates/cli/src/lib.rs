//! Batch experiment runner for the geotherm solver.

pub mod config;
pub mod run;

use geotherm::error::{McError, RateError, StepError};
use thiserror::Error;

pub use config::{Experiment, ExperimentConfig, Overrides, Profile};
pub use run::{run_experiment, Outcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("{0}")]
    Run(String),
}

/// Reads, parses and resolves a config file.
pub fn load_config(
    path: &std::path::Path,
    overrides: &Overrides,
) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let raw = ExperimentConfig::parse(&text).map_err(CliError::Parse)?;
    Ok(raw.resolve(overrides))
}
