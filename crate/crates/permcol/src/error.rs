use thiserror::Error;

/// Crate-wide error type. Fallible operations return `Result<T>`; hot loops
/// validate once at the boundary and use infallible internal paths after.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The underlying multigraph has a cycle, self-loop, or parallel edge.
    #[error("not a forest: {0}")]
    NotAForest(String),

    /// The search budget ran out before the solver reached a verdict.
    /// Never reported as a (possibly wrong) status.
    #[error("node budget {budget} exhausted after {expanded} expansions")]
    BudgetExhausted { budget: u64, expanded: u64 },

    /// The state space k^n exceeds the enumeration cap.
    #[error("state space 2^{log2_states:.1} exceeds cap 2^{log2_cap:.1}")]
    CapExceeded { log2_states: f64, log2_cap: f64 },

    /// Root bracketing failed even after bracket expansion.
    #[error("no sign change of the objective on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for an invalid-parameter error with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
