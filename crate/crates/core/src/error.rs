use thiserror::Error;

pub type Result<T> = std::result::Result<T, HbbError>;

#[derive(Debug, Error)]
pub enum HbbError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A frame index maps to a position outside the cell.
    #[error("range error: {0}")]
    Range(String),

    /// A configuration key is unknown, malformed or violates an invariant.
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HbbError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        HbbError::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        HbbError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input rather than the runtime.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HbbError::Domain(_) | HbbError::Range(_) | HbbError::Config { .. }
        )
    }
}
