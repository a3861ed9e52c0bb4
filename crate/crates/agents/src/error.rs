use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,

    #[error("non-finite value in {0} after update {1}")]
    NonFinite(&'static str, u64),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error(transparent)]
    Net(#[from] diffnet::NetError),

    #[error(transparent)]
    Env(#[from] evcs_core::EvcsError),
}

pub type Result<T> = std::result::Result<T, AgentError>;

pub(crate) fn ensure(ok: bool, key: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(AgentError::InvalidConfig {
            key: key.to_string(),
            reason: reason.to_string(),
        })
    }
}
