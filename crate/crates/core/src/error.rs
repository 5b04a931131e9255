use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid coverage: h = {h} with n = {n}")]
    InvalidCoverage { h: usize, n: usize },

    #[error("infeasible coverage: h = {h} exceeds n = {n}")]
    InfeasibleCoverage { h: usize, n: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid selection: {0}")]
    InvalidSelection(String),

    #[error("lp solver: {0}")]
    LpSolver(String),

    #[error("dual bracket not found")]
    DualBracket,

    #[error("oracle size guard: C({n}, {h}) exceeds {limit} subsets")]
    OracleSizeGuard { n: usize, h: usize, limit: u64 },

    #[error("covariance matrix is not positive definite (rho = {rho})")]
    NotPositiveDefinite { rho: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("ragged row {row}: expected {expected} fields, got {got}")]
    RaggedRow { row: usize, expected: usize, got: usize },

    #[error("non-numeric cell at row {row}, column {col}: `{value}`")]
    NonNumeric { row: usize, col: usize, value: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
