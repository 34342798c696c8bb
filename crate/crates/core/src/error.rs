use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("replay buffer holds {available} experiences, {requested} requested")]
    BufferUnderflow { available: usize, requested: usize },

    #[error("state space exceeds the bound of {bound} states")]
    StateBound { bound: usize },

    #[error("relative value iteration did not converge in {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used for CLI exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::InvalidAction(_) | Error::InvalidArgument(_) | Error::Shape(_) => "argument",
            Error::BufferUnderflow { .. } => "replay",
            Error::StateBound { .. } | Error::NotConverged { .. } => "oracle",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }
}
