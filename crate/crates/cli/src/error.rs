use std::path::PathBuf;

use chgpt_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("missing stage outputs: {}", .0.join(", "))]
    MissingStages(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
            CliError::MissingStages(_) => 5,
            CliError::Io { .. } | CliError::Output(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { ref name, ref reason } => CliError::Schema(format!("{name}: {reason}")),
            CoreError::UnsupportedScenario(_)
            | CoreError::CompensatorUndefined(_)
            | CoreError::TooFewPaths { .. } => CliError::Schema(e.to_string()),
            CoreError::ArbitrageDetected(_) => CliError::Verification(e.to_string()),
            CoreError::InvalidUniform(_)
            | CoreError::SingularHazard { .. }
            | CoreError::NumericalOverflow { .. }
            | CoreError::InconsistentData(_)
            | CoreError::RejectionExhausted { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
