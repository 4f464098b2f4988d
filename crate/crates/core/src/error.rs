//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The intensity class is empty: the cap is below the background sup-norm.
    #[error("empty intensity class: mu_inf {mu_inf} < max|mu0| = {mu0_max}")]
    EmptyClass { mu_inf: f64, mu0_max: f64 },

    /// An intensity entry is outside (0, mu_inf].
    #[error("bad intensity in {context}: entry {value} not in (0, {mu_inf}]")]
    BadIntensity {
        context: String,
        value: f64,
        mu_inf: f64,
    },

    /// Signal bookkeeping is inconsistent with the column count.
    #[error("bad sparsity: {0}")]
    BadSparsity(String),

    /// A signal column coincides with the background.
    #[error("signal column {index} is identical to the background")]
    DegenerateSignal { index: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column index {index} out of range [1, {n}]")]
    IndexOutOfRange { index: usize, n: usize },

    /// Every observation entry is zero; the sigma^2 grid is unidentifiable.
    #[error("all observation entries are zero; grid step unidentifiable")]
    AllZero,

    #[error("empty sample")]
    EmptySample,

    #[error("rate must be strictly positive, got {0}")]
    NonPositiveRate(f64),

    #[error("eps out of range: {0}")]
    BadEps(f64),

    /// A truncated series exceeded its term budget.
    #[error("series did not converge within {max_terms} terms")]
    NoConvergence { max_terms: usize },

    /// The randomized packing search ran out of candidates.
    #[error("packing budget exhausted after {tried} candidates: kept {achieved} of {target} sets")]
    PackingBudgetExceeded {
        tried: usize,
        achieved: usize,
        target: usize,
    },

    #[error("sweep grid too large: {cells} cells exceeds cap {cap}")]
    GridTooLarge { cells: usize, cap: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for runtime budget/convergence failures; false for validation
    /// errors. The CLI maps the former to exit code 3 and the latter to 2.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::PackingBudgetExceeded { .. }
        )
    }
}
