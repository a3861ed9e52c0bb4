//! Learning controllers for the charging-station MDP: soft actor-critic,
//! TD3, a time-of-use rule and a random baseline, plus the shared replay
//! buffer, training loop and evaluation rollouts.

pub mod agent;
pub mod baseline;
pub mod error;
pub mod eval;
pub mod replay;
pub mod sac;
pub mod td3;
pub mod train;

pub use agent::{to_env_action, ActionMode, Agent, UpdateLosses, ACT_DIM, OBS_DIM};
pub use baseline::{random_action, rule_based_policy};
pub use error::{AgentError, Result};
pub use eval::{rollout, Controller, Rollout};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use sac::{SacAgent, SacConfig};
pub use td3::{Td3Agent, Td3Config};
pub use train::{train, train_agent, AgentConfig, EpisodeLog, Learner, TrainLog, TrainSchedule};
