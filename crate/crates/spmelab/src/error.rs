//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A value fell outside the range an operation is defined on.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Newton iteration failed to converge at a time step.
    #[error("solver divergence at step {step} (t = {time:.6e}): {detail}")]
    SolverDivergence {
        step: usize,
        time: f64,
        detail: String,
    },

    /// Non-finite values appeared in the solution.
    #[error("numerical blowup at step {step} (t = {time:.6e})")]
    NumericalBlowup { step: usize, time: f64 },

    /// Two objects that must share a grid or window do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Expression parsing failed; `pos` is a byte offset into the source.
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// A region left the domain by less than the required margin.
    #[error("domain margin violated: {0}")]
    DomainMargin(String),

    /// A bump lattice could not fit enough centers into the domain.
    #[error("too few bump centers: {0}")]
    TooFewCenters(String),

    /// Support containment could not be certified after all shrink attempts.
    #[error("containment failure: {0}")]
    ContainmentFailure(String),

    /// Not enough data points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Coefficient norms vanish where the bound needs them positive.
    #[error("degenerate coefficient: {0}")]
    DegenerateCoefficient(String),

    /// Configuration file could not be read or validated.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
