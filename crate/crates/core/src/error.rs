use std::time::Duration;

use thiserror::Error;

use crate::collector::ProcessEntry;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("permission denied: {0}")]
    Permission(String),

    #[error("performance monitoring interface unavailable: {0}")]
    Unavailable(String),

    #[error("event `{0}` is not supported on this CPU")]
    UnsupportedEvent(String),

    #[error("no free hardware counter for `{0}`; measure fewer events at once (counter multiplexing is not used)")]
    CountersExhausted(String),

    #[error("no new process matching `{pattern}` appeared within {waited:?} ({} processes in last scan)", snapshot.len())]
    Timeout {
        pattern: String,
        waited: Duration,
        snapshot: Vec<ProcessEntry>,
    },

    #[error("network too large for the memory budget ({needed} bytes needed, {budget} allowed); downsample the input features")]
    MemoryBudget { needed: u64, budget: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse grouping used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Permission,
    Runtime,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::MemoryBudget { .. } => ErrorCategory::Config,
            Error::Data(_) | Error::Parse { .. } | Error::Json(_) => ErrorCategory::Data,
            Error::Permission(_) | Error::Unavailable(_) => ErrorCategory::Permission,
            Error::UnsupportedEvent(_)
            | Error::CountersExhausted(_)
            | Error::Timeout { .. }
            | Error::Io(_) => ErrorCategory::Runtime,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
