//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by construction, numerics, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix factorization failed to converge or the matrix is singular.
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    /// A time integration was aborted (step underflow, non-finite state).
    #[error("integration failure: {0}")]
    Integration(String),

    /// Training aborted on a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    /// A serialized artifact is malformed or has the wrong magic/version.
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    /// A prerequisite artifact (dataset, model, basis) is missing.
    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),

    /// Rank selection retained no basis functions.
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
