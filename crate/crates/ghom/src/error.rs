//! Shared error type for all modules.

use thiserror::Error;

/// Errors produced by model construction, linear algebra, estimation and I/O.
#[derive(Debug, Error)]
pub enum GhomError {
    /// A matrix that must be positive definite failed its Cholesky pivot test.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A nominally symmetric input is too far from symmetric to repair.
    #[error("asymmetric input: max |a[i][j] - a[j][i]| = {max_asym:.3e} exceeds limit {limit:.3e}")]
    AsymmetricInput { max_asym: f64, limit: f64 },

    /// An iterative routine exhausted its budget without meeting its tolerance.
    #[error("failed to converge: {0}")]
    ConvergenceFailure(String),

    /// A partition violates its invariants (overlap, gap, empty cluster, bad index).
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// A requested index (eigenvector component, cluster, ...) is out of range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A cluster's sample covariance is numerically singular where PD is required.
    #[error("degenerate cluster: {0}")]
    DegenerateCluster(String),

    /// A data column has (numerically) zero variance where scaling is required.
    #[error("degenerate column: {0}")]
    DegenerateColumn(String),

    /// A transformation matrix that must be invertible is singular.
    #[error("singular transform: {0}")]
    SingularTransform(String),

    /// A mathematical property the caller asserted (or a theorem guarantees)
    /// was violated by the computed result. This signals a test failure or a
    /// precondition breach, not a recoverable user error.
    #[error("property violation: {0}")]
    PropertyViolation(String),

    /// Any other invalid argument or configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A file failed to parse; `line` is 1-based.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GhomError>;
