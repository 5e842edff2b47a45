use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("pmf overdraw at unit {key}: deficit {deficit:e}")]
    Overdraw { key: u32, deficit: f64 },

    #[error("no threshold exists for query {} with size {d_units} units: mass {available} in region is below gamma {gamma}",
        t.map(|t| t.to_string()).unwrap_or_else(|| "?".into()))]
    Infeasible {
        t: Option<usize>,
        d_units: u32,
        available: f64,
        gamma: f64,
    },

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error("state space too large: {0}")]
    StateCap(String),

    #[error("linear program: {0}")]
    Lp(String),

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
