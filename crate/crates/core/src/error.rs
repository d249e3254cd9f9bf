use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: String,
        found: String,
    },
    #[error("non-finite entry in {0}")]
    NonFinite(String),
    #[error("rank deficiency: {0}")]
    Rank(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{condition} infeasible (residual {residual:.3e})")]
    Infeasible { condition: String, residual: f64 },
    #[error("trajectory diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },
    #[error("{discarded} of {trials} Monte Carlo trials diverged")]
    DivergedTrials { discarded: usize, trials: usize },
}

impl Error {
    pub(crate) fn shape(
        context: impl Into<String>,
        expected: (usize, usize),
        found: (usize, usize),
    ) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }

    pub(crate) fn len(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: format!("length {expected}"),
            found: format!("length {found}"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
