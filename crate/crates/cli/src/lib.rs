//! Experiment harness: trajectory generation, model comparison, observer
//! runs and report consolidation over a shared output directory.

pub mod commands;
pub mod config;
pub mod manifest;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical fault: {0}")]
    Numerical(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<vehval_core::plant::TrajectoryError> for CliError {
    fn from(e: vehval_core::plant::TrajectoryError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<vehval_core::validity::ValidityError> for CliError {
    fn from(e: vehval_core::validity::ValidityError) -> Self {
        use vehval_core::validity::ValidityError as V;
        match e {
            V::Dynamics { .. } => CliError::Numerical(e.to_string()),
            V::Threshold(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
