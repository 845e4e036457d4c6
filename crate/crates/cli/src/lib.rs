//! The `vibecycle` command-line tool: `synth`, `train`, `translate` and
//! `evaluate`.

pub mod commands;
pub mod config;
pub mod plot;

use thiserror::Error;
use vibecycle_core::metrics::MetricError;
use vibecycle_core::signal::DataError;
use vibecycle_core::synth::SynthError;
use vibecycle_core::training::TrainError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) | CliError::Io(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Data(d) => CliError::Data(d.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => CliError::Numerical(e.to_string()),
            TrainError::Config { .. } | TrainError::Network(_) | TrainError::Loss(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Only the CPU backend exists; anything else in `VIBECYCLE_DEVICE` is a
/// configuration error.
pub fn check_device(value: Option<&str>) -> Result<(), CliError> {
    match value {
        None | Some("") | Some("cpu") => Ok(()),
        Some(other) => Err(CliError::Config(format!(
            "VIBECYCLE_DEVICE={other} is not available (only cpu)"
        ))),
    }
}
