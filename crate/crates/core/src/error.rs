use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised by an agent while it is producing a choice or rating.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("could not parse reply {reply:?}: {reason}")]
    ParseFailure { reply: String, reason: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
}

impl AgentError {
    /// True for failures that originate at a remote chat endpoint.
    pub fn is_remote(&self) -> bool {
        matches!(
            self,
            AgentError::Transport(_) | AgentError::ParseFailure { .. }
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("session for agent {agent_id} aborted at trial {trial}: {source}")]
    SessionAborted {
        agent_id: String,
        trial: usize,
        #[source]
        source: AgentError,
    },
    #[error("estimation failed: {0}")]
    EstimationFailure(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("incomplete comparison: {0}")]
    IncompleteComparison(String),
    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{path}:{line}: {message}")]
    Validation {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(
        path: impl Into<PathBuf>,
        line: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
