use std::path::PathBuf;

use fput2d_core::harness::HarnessError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("carrier rejected ({class}): {message}")]
    Carrier { class: String, message: String },
    #[error("solver error ({class}): {message}")]
    Solver { class: String, message: String },
    #[error("acceptance failed: {0}")]
    Acceptance(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Carrier { .. } => 2,
            CliError::Solver { .. } => 3,
            CliError::Acceptance(_) => 4,
        }
    }

    /// Errors raised while validating a plan, before any solver runs.
    pub fn from_validation(e: HarnessError) -> Self {
        if e.is_carrier_error() {
            Self::from_run(e)
        } else {
            CliError::Config(e.to_string())
        }
    }

    /// Errors raised while running.
    pub fn from_run(e: HarnessError) -> Self {
        let class = e.class().to_string();
        let message = e.to_string();
        if e.is_carrier_error() {
            CliError::Carrier { class, message }
        } else if let HarnessError::Plan(m) = e {
            CliError::Config(m)
        } else if matches!(e, HarnessError::Fit(_)) {
            CliError::Acceptance(message)
        } else {
            CliError::Solver { class, message }
        }
    }
}
