use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvcsError {
    /// A battery transition left the configured SOC window. Projection should
    /// make this unreachable, so seeing it means an upstream bug.
    #[error("soc {soc} outside [{soc_min}, {soc_max}] after transition")]
    BoundsViolation { soc: f64, soc_min: f64, soc_max: f64 },

    #[error("negative power command: p_ch={p_ch} kW, p_dis={p_dis} kW")]
    NegativePower { p_ch: f64, p_dis: f64 },

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("episode finished; reset before stepping")]
    EpisodeFinished,

    #[error("interval {t} out of range for a day of {len} intervals")]
    IntervalOutOfRange { t: usize, len: usize },
}

impl EvcsError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        EvcsError::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, EvcsError>;

/// Fails with `InvalidConfig` for `key` unless `ok` holds.
pub(crate) fn ensure(ok: bool, key: &str, reason: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(EvcsError::config(key, reason()))
    }
}
