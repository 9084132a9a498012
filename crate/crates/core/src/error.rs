//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the lab's numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("lattice mismatch between operands")]
    LatticeMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("Dirichlet eigenvalue hit: relative pivot {pivot:.3e} below threshold {threshold:.1e}")]
    DirichletEigenvalue { pivot: f64, threshold: f64 },

    #[error("field is not mean-zero (mean = {0:.3e})")]
    NotMeanZero(f64),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("bracket failure while locating zero #{index}: {detail}")]
    BracketFailure { index: usize, detail: String },

    #[error("insufficient system size: {0}")]
    InsufficientSize(String),

    #[error("geometry violation: {0}")]
    GeometryViolation(String),

    #[error("budget infeasible: {0}")]
    BudgetInfeasible(String),

    #[error("solver breakdown: {0}")]
    SolverBreakdown(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
