use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    /// A scalar argument is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural parameter (dimension, exponent, grid size) is invalid.
    #[error("parameter error: {0}")]
    Param(String),

    /// Two fields or grids that must match do not.
    #[error("shape error: {0}")]
    Shape(String),

    /// An operation precondition stated by the caller contract is violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An input is degenerate for the requested operation (e.g. zero field).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A sign component collapsed during nodal descent.
    #[error("degenerate descent: {0}")]
    DegenerateDescent(String),

    /// An iterative solve ran out of iterations; carries the last iterate.
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        residual: f64,
        iterations: usize,
        last: Box<crate::nehari::SolveOutcome>,
    },

    /// An eigenvalue iteration failed to reach its residual target.
    #[error("eigensolver did not converge: worst residual {worst_residual:.3e} for {wanted} pairs")]
    EigenNonConvergence { worst_residual: f64, wanted: usize },

    /// A Morse-index count has eigenvalues too close to zero to classify.
    #[error("morse index indeterminate: {near_zero} eigenvalue(s) within {tol:.3e} of zero")]
    IndeterminateIndex { near_zero: usize, tol: f64 },

    /// Configuration file or key-value content is invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
