//! Error type shared by all modules.

use thiserror::Error;

/// Coarse classification used for process exit codes: validation errors are
/// caller mistakes, numeric errors are algorithm failures on valid input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numeric,
}

#[derive(Debug, Clone, Error)]
pub enum MigError {
    #[error("{context}: dimension mismatch ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:.6e}, largest {largest:.6e})")]
    NotPositiveDefinite { eigenvalue: f64, largest: f64 },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("eigendecomposition did not converge within {iterations} iterations")]
    EigNonConvergence { iterations: usize },

    #[error("Cholesky factorization failed: input lost positive-definiteness")]
    CholeskyFailed,

    #[error("{context}: fixed-point iteration stopped after {iterations} iterations with residual {residual:.3e}")]
    IterationStalled {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("empty matrix set")]
    EmptySet,

    #[error("compressed matrix {index} is numerically singular (eigenvalue {eigenvalue:.3e})")]
    SingularCompression { index: usize, eigenvalue: f64 },

    #[error("line search found no acceptable step after {halvings} halvings (gradient norm {gradient_norm:.3e}, objective {objective:.6e})")]
    LineSearchFailed {
        halvings: u32,
        gradient_norm: f64,
        objective: f64,
    },

    #[error("rank deficiency in QR retraction (column {column})")]
    RankDeficient { column: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl MigError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            MigError::DimensionMismatch { .. }
            | MigError::NotHermitian { .. }
            | MigError::NonFiniteEntry { .. }
            | MigError::EmptySet
            | MigError::DegenerateInput(_)
            | MigError::InvalidParameter(_) => ErrorKind::Validation,
            MigError::NotPositiveDefinite { .. }
            | MigError::EigNonConvergence { .. }
            | MigError::CholeskyFailed
            | MigError::IterationStalled { .. }
            | MigError::SingularCompression { .. }
            | MigError::LineSearchFailed { .. }
            | MigError::RankDeficient { .. } => ErrorKind::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, MigError>;
