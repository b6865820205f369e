//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (bad polygon, dimension mismatch,
    /// unparseable file).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Observation sites that fall outside the domain, by index.
    #[error("{} point(s) outside the domain: indices {indices:?}", indices.len())]
    PointsOutsideDomain { indices: Vec<usize> },

    /// Covariance parameters violate their positivity constraints.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A matrix expected to be symmetric positive definite failed its
    /// Cholesky factorization (after one jitter retry where applicable).
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An iterative solver hit its iteration cap. For covariance selection
    /// the best iterate is carried along so callers can inspect it.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Option<Box<crate::covsel::CovSelResult>>,
    },

    /// A graph handed to the perfect-ordering routine is not chordal; this
    /// signals a bug in the completion step.
    #[error("graph is not chordal")]
    NotChordal,

    /// The two query points lie in parts of the domain with no connecting
    /// path.
    #[error("points are not connected within the domain")]
    Unreachable,

    /// A prediction site has no visible observations.
    #[error("no visible neighbors for prediction site")]
    NoVisibleNeighbors,

    /// Numerical failure inside a likelihood block; carries the index of the
    /// offending clique (or separator) in the decomposition.
    #[error("numerical failure in likelihood block {clique}")]
    NumericalFailure { clique: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
