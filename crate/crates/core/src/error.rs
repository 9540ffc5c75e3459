use std::path::PathBuf;

use thiserror::Error;

use crate::qp::QpStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: requested {requested} samples, have {available}")]
    InsufficientData { requested: usize, available: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("class {0} has no samples")]
    EmptyClass(i8),

    #[error("loss-balance weight must be positive, got {0}")]
    NonPositiveWeight(f64),

    #[error("invalid interval boundaries: {0}")]
    InvalidIntervals(String),

    #[error("problem too large for the exact ordinal oracle: n = {n}, cap = {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("duplicate oracle value {0}")]
    DuplicateOracle(f64),

    #[error("dataset has no oracle column")]
    MissingOracle,

    #[error("nu = {nu} is infeasible (solver status {status:?}, certificate residual {certificate:.3e})")]
    InfeasibleNu {
        nu: f64,
        status: QpStatus,
        certificate: f64,
    },

    #[error("infeasible parameters: {msg}")]
    InfeasibleParams {
        msg: String,
        status: Option<QpStatus>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("series too short: need {needed} points, have {have}")]
    SeriesTooShort { needed: usize, have: usize },

    #[error("extended selection requires an extended validation tensor")]
    MissingExtendedSet,

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("KKT system ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("solver did not reach optimality: {0:?}")]
    SolverFailed(QpStatus),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
