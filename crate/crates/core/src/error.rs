//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must have at least 2 nodes per axis, got {nx}x{ny}")]
    InvalidGrid { nx: usize, ny: usize },

    #[error("grid mismatch: expected {expected_nx}x{expected_ny}, got {got_nx}x{got_ny}")]
    GridMismatch {
        expected_nx: usize,
        expected_ny: usize,
        got_nx: usize,
        got_ny: usize,
    },

    #[error("operation requires a {expected}, got a {got}")]
    DimensionMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no data assimilated (omega = 0); refusing to estimate")]
    NoData,

    #[error("linear solver failed: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    SolverFailure { residual: f64, tolerance: f64 },

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
