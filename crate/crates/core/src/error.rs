//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    /// A spec parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A function was evaluated outside its domain (e.g. negative density).
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural assumption on the model functions is violated.
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// A bracket/scan never observed the predicate it was waiting for.
    #[error("scan diverged: {0}")]
    ScanDiverged(String),

    /// An operation was called on the wrong motility branch.
    #[error("branch mismatch: {0}")]
    Branch(String),

    /// Grid construction failed.
    #[error("grid error: {0}")]
    Grid(String),

    /// Iterative solver failed to reach tolerance.
    #[error("solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    /// A time step was rejected.
    #[error("step rejected: {0}")]
    Step(String),

    /// Non-finite values appeared where finite ones are required.
    #[error("non-finite values: {0}")]
    NonFinite(String),

    /// Malformed input to an analysis routine (series, traces, ...).
    #[error("input error: {0}")]
    Input(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
