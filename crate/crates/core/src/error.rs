//! Error type shared by all solver modules.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or solver specification is inconsistent or out of range.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// Contact kinematics are rank-deficient or otherwise unusable.
    #[error("invalid contact kinematics: {0}")]
    InvalidKinematics(String),

    /// A matrix that must be invertible (or positive definite) is not.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// An eigenvalue or factorization routine failed its residual check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}): {context}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        context: String,
    },

    /// The time integration produced a non-finite or exploding state.
    #[error("divergence detected at step {step} (t = {time:.6e}): {detail}")]
    Divergence { step: usize, time: f64, detail: String },

    /// Dimension mismatch between coupled objects.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// File input/output failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed external data (Matrix Market files, sidecar descriptions).
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
