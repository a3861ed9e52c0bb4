use std::io::{self, Write};

use evcs_core::{Env, EnvConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{to_env_action, ActionMode, Agent, ACT_DIM, OBS_DIM};
use crate::error::{ensure, AgentError, Result};
use crate::replay::{ReplayBuffer, Transition};
use crate::sac::{SacAgent, SacConfig};
use crate::td3::{Td3Agent, Td3Config};

/// Independent random streams derived from one experiment seed.
pub mod stream {
    pub const INIT: u64 = 0;
    pub const TRAIN_ENV: u64 = 1;
    pub const TRAIN_AGENT: u64 = 2;
    pub const EVAL_ENV: u64 = 3;
    pub const EVAL_POLICY: u64 = 4;
}

pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Episode count and update cadence, shared by every learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub episodes: usize,
    /// Episode `e` runs day `e % calendar_days`.
    pub calendar_days: usize,
    /// Transitions collected with uniform random actions before learning starts.
    pub warmup_steps: usize,
    pub updates_per_step: usize,
    pub buffer_capacity: usize,
    /// Episodes between checkpoint callbacks; 0 disables them.
    pub checkpoint_every: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            episodes: 365,
            calendar_days: 365,
            warmup_steps: 1000,
            updates_per_step: 1,
            buffer_capacity: 100_000,
            checkpoint_every: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        ensure(self.calendar_days >= 1, "calendar_days", "must be at least 1")?;
        ensure(self.buffer_capacity >= 1, "buffer_capacity", "must be at least 1")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AgentConfig {
    Sac(SacConfig),
    Td3(Td3Config),
}

impl AgentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AgentConfig::Sac(_) => "sac",
            AgentConfig::Td3(_) => "td3",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Learner {
    Sac(SacAgent),
    Td3(Td3Agent),
}

impl Learner {
    /// Fresh networks drawn from the seed's initialization stream.
    pub fn new(config: &AgentConfig, seed: u64) -> Result<Self> {
        let mut rng = rng_stream(seed, stream::INIT);
        Ok(match config {
            AgentConfig::Sac(c) => Learner::Sac(SacAgent::new(OBS_DIM, ACT_DIM, c.clone(), &mut rng)?),
            AgentConfig::Td3(c) => Learner::Td3(Td3Agent::new(OBS_DIM, ACT_DIM, c.clone(), &mut rng)?),
        })
    }

    pub fn agent(&self) -> &dyn Agent {
        match self {
            Learner::Sac(a) => a,
            Learner::Td3(a) => a,
        }
    }

    pub fn agent_mut(&mut self) -> &mut dyn Agent {
        match self {
            Learner::Sac(a) => a,
            Learner::Td3(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub day: usize,
    pub episode_return: f64,
    /// Grid purchases, `sum p_grid * price * dt`.
    pub operational_cost_usd: f64,
    pub degradation_usd: f64,
    pub soc_violations: usize,
    pub buffer_size: usize,
    /// Mean critic loss over the episode's updates; 0 before learning starts.
    pub critic_loss: f64,
}

pub const TRAIN_LOG_HEADER: &str =
    "episode,day,return,operational_cost_usd,degradation_usd,soc_violations,buffer_size,critic_loss";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.episode_return).collect()
    }

    /// Mean returns of the first and last `fraction` of episodes.
    pub fn phase_means(&self, fraction: f64) -> (f64, f64) {
        let r = self.returns();
        let k = ((r.len() as f64 * fraction).round() as usize).clamp(1, r.len().max(1));
        if r.is_empty() {
            return (0.0, 0.0);
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        (mean(&r[..k]), mean(&r[r.len() - k..]))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRAIN_LOG_HEADER}")?;
        for e in &self.episodes {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.episode,
                e.day,
                e.episode_return,
                e.operational_cost_usd,
                e.degradation_usd,
                e.soc_violations,
                e.buffer_size,
                e.critic_loss
            )?;
        }
        Ok(())
    }
}

/// Trains a freshly initialized learner. See [`train_agent`].
pub fn train(
    env_config: &EnvConfig,
    agent_config: &AgentConfig,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<(Learner, TrainLog)> {
    let mut learner = Learner::new(agent_config, seed)?;
    let log = train_agent(env_config, learner.agent_mut(), schedule, seed, &mut |_, _| Ok(()))?;
    Ok((learner, log))
}

/// Runs `schedule.episodes` one-day episodes, cycling through the calendar.
/// Battery throughput restarts at each pass over the calendar. After warmup
/// the agent takes `updates_per_step` gradient steps per environment step.
pub fn train_agent(
    env_config: &EnvConfig,
    agent: &mut dyn Agent,
    schedule: &TrainSchedule,
    seed: u64,
    on_checkpoint: &mut dyn FnMut(usize, &dyn Agent) -> Result<()>,
) -> Result<TrainLog> {
    schedule.validate()?;
    let mut env = Env::new(env_config.clone())?;
    let mut env_rng = rng_stream(seed, stream::TRAIN_ENV);
    let mut agent_rng = rng_stream(seed, stream::TRAIN_AGENT);
    let mut buffer = ReplayBuffer::new(schedule.buffer_capacity);
    let mut log = TrainLog::default();
    let mut steps = 0usize;

    for episode in 0..schedule.episodes {
        let day = episode % schedule.calendar_days;
        if day == 0 {
            env.reset_horizon();
        }
        let start = env.reset(day, &mut env_rng);
        let mut obs = env.observe(&start);
        let mut entry = EpisodeLog {
            episode,
            day,
            episode_return: 0.0,
            operational_cost_usd: 0.0,
            degradation_usd: 0.0,
            soc_violations: 0,
            buffer_size: 0,
            critic_loss: 0.0,
        };
        let mut n_updates = 0usize;
        while !env.is_done() {
            let u = if steps < schedule.warmup_steps {
                (0..ACT_DIM).map(|_| agent_rng.random_range(-1.0..1.0)).collect()
            } else {
                agent.act(&obs, ActionMode::Explore, &mut agent_rng)?
            };
            let out = env.step(to_env_action(&u), &mut env_rng)?;
            if !out.reward.is_finite() {
                return Err(AgentError::NonFinite("reward", steps as u64));
            }
            let next_obs = env.observe(&out.next_state);
            buffer.push(Transition {
                state: obs.to_vec(),
                action: u,
                reward: out.reward,
                next_state: next_obs.to_vec(),
                done: out.done,
            });
            entry.episode_return += out.reward;
            entry.operational_cost_usd += out.powers.p_grid * out.state.price * env_config.dt_hours;
            entry.degradation_usd += out.components.c_deg;
            entry.soc_violations += usize::from(out.soc_violation);
            steps += 1;

            if steps >= schedule.warmup_steps && buffer.len() >= agent.batch_size() {
                for _ in 0..schedule.updates_per_step {
                    let losses = agent.update(&buffer, &mut agent_rng)?;
                    entry.critic_loss += 0.5 * (losses.critic1 + losses.critic2);
                    n_updates += 1;
                }
            }
            obs = next_obs;
        }
        if n_updates > 0 {
            entry.critic_loss /= n_updates as f64;
        }
        entry.buffer_size = buffer.len();
        log.episodes.push(entry);
        if schedule.checkpoint_every > 0 && (episode + 1) % schedule.checkpoint_every == 0 {
            on_checkpoint(episode + 1, agent)?;
        }
    }
    Ok(log)
}
