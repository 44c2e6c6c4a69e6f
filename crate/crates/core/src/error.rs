use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration. `field` names the offending key.
    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// The inter-satellite link graph is unusable (disconnected, missing bridges).
    #[error("topology error: {0}")]
    Topology(String),

    /// Malformed numeric input (length mismatch, non-finite cost, bad weights).
    #[error("input error: {0}")]
    Input(String),

    /// A class distribution with no samples behind it.
    #[error("undefined class distribution: total sample count is zero")]
    UndefinedDistribution,

    /// Numerical failure during local training.
    #[error("training diverged at local round {round}: {reason}")]
    Training { round: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
