//! Shared error type.

use thiserror::Error;

/// Errors surfaced by the numeric core.
///
/// Solver errors carry their residuals in `f64` regardless of the working
/// scalar type. Errors that must hand back a recoverable iterate
/// ([`crate::estimator::EstimateError`], [`crate::baselines::GdError`])
/// wrap this type instead of extending it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("eigendecomposition failed to converge for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error("singular value decomposition failed to converge for a {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },

    #[error("matrix is not symmetric: relative asymmetry {asymmetry:.3e} exceeds {tolerance:.3e}")]
    Asymmetric { asymmetry: f64, tolerance: f64 },

    #[error(
        "solver reached {max_iter} iterations with residuals above threshold \
         (primal {primal:.3e}, dual {dual:.3e})"
    )]
    NonConvergence {
        max_iter: usize,
        primal: f64,
        dual: f64,
    },

    #[error("bisection failed to bracket the constraint after {attempts} expansions")]
    BracketFailure { attempts: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: String, right: String },

    #[error("value undefined for the zero matrix")]
    ZeroMatrix,

    #[error("orthonormality violated: Gram deviation {deviation:.3e} exceeds {tolerance:.3e}")]
    NotOrthonormal { deviation: f64, tolerance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("incomplete (K, L) grid: missing cells {0:?}")]
    IncompleteGrid(Vec<(usize, usize)>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim_mismatch(left: impl ToString, right: impl ToString) -> Self {
        Error::DimMismatch {
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}
