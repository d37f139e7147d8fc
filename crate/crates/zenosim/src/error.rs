//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by state construction, measurement, propagation, and
/// optimization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {max_dev:.3e})")]
    NotHermitian { max_dev: f64 },

    #[error("projector is not idempotent (max deviation {max_dev:.3e})")]
    NotIdempotent { max_dev: f64 },

    #[error("trace deviates from one by {dev:.3e}")]
    NotUnitTrace { dev: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },

    #[error("state vector has zero norm")]
    ZeroNormVector,

    #[error("state vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("event time {time} outside propagation range [{t_start}, {t_end}]")]
    EventOutOfRange { time: f64, t_start: f64, t_end: f64 },

    #[error("control field evaluated to a non-finite value at t = {time}")]
    NonFiniteField { time: f64 },

    #[error("invalid propagation config: {0}")]
    InvalidConfig(String),

    #[error("invalid genetic-algorithm config: {0}")]
    InvalidGaConfig(String),

    #[error("evaluator failed on genotype {genotype:?}: {source}")]
    Evaluator {
        genotype: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown model '{0}'")]
    UnknownModel(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse scenario file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
