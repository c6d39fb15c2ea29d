use thiserror::Error;

/// Errors produced by the solver and its diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// The linear system could not be solved, even with pivoting.
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// A non-finite value appeared in the state.
    #[error("solution diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    /// The operation is not defined for the given model, e.g. the free
    /// energy at `epsilon = 0`.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
