//! Benchmark fixed-point problems.

mod banded;
mod linear;
mod matrix_market;
mod pagerank;
mod pde;

use thiserror::Error;

use crate::linalg::Vector;

pub use banded::{BandedLu, BandedMatrix};
pub use linear::{random_linear_problem, LinearProblem};
pub use matrix_market::{parse_matrix_market, read_matrix_market};
pub use pagerank::{clustered_pagerank_fixture, PageRankProblem, SparseStochasticMatrix};
pub use pde::{BratuProblem, Diffusivity, NonlinearPoissonProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("I - M is singular or too ill-conditioned (condition {condition:e})")]
    SingularProblem { condition: f64 },
    #[error("matrix is not column stochastic: {0}")]
    NotStochastic(String),
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("matrix has no entries")]
    EmptyMatrix,
    #[error("inner linear solve failed: {0}")]
    LinearSolveFailed(String),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, ProblemError>;

/// A map `G` whose fixed point `s = G(s)` is sought.
///
/// Implementations must be deterministic when [`is_pure`](Self::is_pure)
/// returns true, which allows candidate evaluations to run concurrently.
pub trait FixedPointProblem: Send + Sync {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    fn evaluate(&self, s: &Vector) -> Result<Vector>;

    fn residual(&self, s: &Vector) -> Result<Vector> {
        Ok(self.evaluate(s)? - s)
    }

    fn initial_guess(&self) -> Vector;

    fn known_solution(&self) -> Option<&Vector> {
        None
    }

    fn is_pure(&self) -> bool {
        true
    }
}

pub(crate) fn check_len(expected: usize, v: &Vector) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(ProblemError::DimensionMismatch { expected, got: v.len() })
    }
}
