use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed input: bad dimensions, non-finite entries, broken invariants.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The proximal-gradient solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (kkt residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64, iterate: Vec<f64> },

    /// Occupation fractions asked for a point outside the sticking band.
    #[error("|f| = {force} exceeds mu = {mu}: not a sticking point")]
    NotSticking { force: f64, mu: f64 },

    #[error("unsupported dimension {0} (only d = 1 is supported here)")]
    UnsupportedDimension(usize),

    /// Every exp-weight underflowed even after the max shift.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Mollification could not meet both gaps within the halving budget.
    #[error("approximation failed: sup gap {sup_gap:e} (target {delta:e}), rate gap {rate_gap:e}")]
    Approximation { sup_gap: f64, rate_gap: f64, delta: f64, best: crate::path::PiecewisePath },
}

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
