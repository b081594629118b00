//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },

    #[error("negative B inner product {value:e} (shift {shift} is at or below the top eigenvalue, or roundoff)")]
    NegativeBNorm { value: f64, shift: f64 },

    #[error("invalid shift: {0}")]
    InvalidShift(String),

    #[error("start vector is orthogonal to the top eigenvector")]
    OrthogonalStart,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("iterate diverged after {steps} steps")]
    Diverged { steps: u64, last_finite: Vec<f64> },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("sample cap of {cap} draws reached")]
    SampleCap { cap: u64 },

    #[error("stream exhausted after {consumed} samples")]
    StreamExhausted { consumed: u64 },

    #[error("deadline reached")]
    Deadline,

    #[error("burn-in stalled after {attempts} attempts (best quotient {best_quotient})")]
    Stalled {
        attempts: usize,
        best_quotient: f64,
        best_x: Vec<f64>,
    },

    #[error("shift estimation failed: {0}")]
    EstimationFailed(String),

    #[error("target accuracy {epsilon} is not below the eigengap {gap}; use the gap-free driver")]
    GapFreeRequired { epsilon: f64, gap: f64 },

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
