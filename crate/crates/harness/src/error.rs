use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// `key` is a dotted path into the config file, e.g. `sac.tau`.
    #[error("config `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },

    #[error("oracle instance too large: {0}")]
    OracleTooLarge(String),

    #[error("oracle instance has no feasible dispatch: {0}")]
    OracleInfeasible(String),

    #[error(transparent)]
    Agent(#[from] evcs_agents::AgentError),

    #[error(transparent)]
    Env(#[from] evcs_core::EvcsError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
