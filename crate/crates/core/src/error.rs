use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Fock space: {0}")]
    InvalidSpace(String),

    #[error("Hilbert dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("mode index {mode} out of range for a space with {n_modes} modes")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("negative rate {0} for a collapse channel")]
    NegativeRate(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("zero denominator while computing the {0} displacement")]
    ZeroDenominator(&'static str),

    #[error("truncation dimension {dim} too small for target Fock number {n0} (need at least {need})")]
    TruncationTooSmall { dim: usize, n0: usize, need: usize },

    #[error("integrator rejected step {retries} times at t = {t}")]
    StepRejected { t: f64, retries: usize },

    #[error("steady state is not unique: {0}")]
    DegenerateSteadyState(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("trajectory {index} failed: {reason}")]
    Trajectory { index: usize, reason: String },

    #[error("only {succeeded} of {total} runs succeeded (need {:.0}%)", .required * 100.0)]
    FailureRate {
        succeeded: usize,
        total: usize,
        required: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
