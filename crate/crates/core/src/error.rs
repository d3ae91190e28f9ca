use thiserror::Error;

/// Errors raised across the solver suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no sign change of the bracketed function on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("exhaustive check refused for K = {k} (limit {limit})")]
    SizeLimit { k: usize, limit: usize },

    #[error("dual point outside the domain where the dual function is bounded")]
    DualInfeasible,

    #[error("training diverged on device {device}")]
    Divergence { device: usize },

    #[error("scenario file: {0}")]
    Scenario(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
