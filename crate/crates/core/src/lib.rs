//! Simulation core for a charging station with stationary battery storage:
//! battery economics and dynamics, stochastic EV load, time-of-use tariffs
//! and the scheduling MDP built on top of them.

pub mod battery;
pub mod env;
pub mod error;
pub mod fleet;
pub mod market;

pub use battery::{BessScenarioSpec, BessState, ScenarioId};
pub use env::{
    normalize_state, project_action, Action, Env, EnvConfig, EnvState, PowerFlows, RewardComponents, StepOutcome,
    TraceRecord,
};
pub use error::{EvcsError, Result};
pub use fleet::{FleetSpec, LoadProfile};
pub use market::{DayType, PriceSchedule};
