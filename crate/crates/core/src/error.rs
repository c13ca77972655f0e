use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series needed more terms than allowed to reach the requested accuracy.
    #[error("truncation budget exceeded: {max_terms} terms leave a tail bound of {achieved_bound:e}")]
    Truncation { max_terms: usize, achieved_bound: f64 },

    #[error("aliasing: a grid of {grid} points cannot carry {modes} modes (need at least {required})")]
    Aliasing { grid: usize, modes: usize, required: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The drift produced a non-finite value; `at` names the grid point or mode.
    #[error("drift evaluation returned {value} at {at}")]
    Evaluation { at: String, value: f64 },

    /// The strict step-size hypothesis `δ < T/12 ∧ log(3/2)/(4|b|₁)` is violated.
    #[error("step size hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl Error {
    /// Process exit status: 1 for usage, configuration and domain errors,
    /// 3 for numerical failures, 0 for inconclusive results.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Truncation { .. } | Error::Evaluation { .. } => 3,
            Error::Inconclusive(_) => 0,
            _ => 1,
        }
    }
}
