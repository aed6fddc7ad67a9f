use std::path::PathBuf;

use crate::matrix::SpdReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max |M - M^T| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    /// Eigenvalue iteration hit its cap; `best` is the last estimate.
    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    Convergence { iterations: usize, best: SpdReport },

    #[error("solver trajectory diverged at step {step} (|x| = {norm:e}); time step too large")]
    Instability { step: u64, norm: f64 },

    #[error("operator is not positive definite after damping (alpha_min = {alpha_min:e}, alpha_max = {alpha_max:e})")]
    Definiteness { alpha_min: f64, alpha_max: f64 },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("layer {layer}: singular Kronecker factor: {source}")]
    SingularFactor {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("linear solves failed for columns {columns:?}: {first}")]
    ColumnSolves {
        columns: Vec<usize>,
        first: Box<Error>,
    },

    #[error("training step {step}: {source}")]
    Training {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
