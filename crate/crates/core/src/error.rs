use thiserror::Error;

/// Errors raised by the simulation and verification layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("uniform draw {0} is outside the open interval (0, 1)")]
    InvalidUniform(f64),

    #[error("compensator undefined for predictable time ({0})")]
    CompensatorUndefined(&'static str),

    #[error("singular hazard: survival probability vanishes at t = {time} before the change point")]
    SingularHazard { time: f64 },

    #[error("numerical overflow on path {path} at step {step}")]
    NumericalOverflow { path: usize, step: usize },

    #[error("unsupported scenario: {0}")]
    UnsupportedScenario(String),

    #[error("inconsistent path data: {0}")]
    InconsistentData(String),

    #[error("arbitrage detected: {0}")]
    ArbitrageDetected(String),

    #[error("too few paths: got {got}, need at least {min}")]
    TooFewPaths { got: usize, min: usize },

    #[error("rejection sampling of the change point exhausted {attempts} attempts on path {path}")]
    RejectionExhausted { path: usize, attempts: usize },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
