use thiserror::Error;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Format,
    Domain,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("spectral overlap undefined: filtered line carries no power")]
    NoOverlap,

    #[error("no half-maximum crossing on the {side} side of the peak")]
    NoCrossing { side: &'static str },

    #[error("empty search grid: no admissible parameter combination")]
    EmptyGrid,

    #[error("tally mismatch: {0}")]
    TallyMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Config,
            Error::Format { .. } => ErrorCategory::Format,
            Error::Io(_) => ErrorCategory::Io,
            _ => ErrorCategory::Domain,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
