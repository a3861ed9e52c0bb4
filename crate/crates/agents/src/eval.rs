use evcs_core::{Action, Env, EnvConfig, EnvState, TraceRecord};
use rand::RngCore;

use crate::agent::{ActionMode, Agent};
use crate::baseline::{random_action, rule_based_policy};
use crate::error::Result;
use crate::train::{rng_stream, stream};

/// Anything that can drive the environment during evaluation.
#[derive(Clone, Copy)]
pub enum Controller<'a> {
    /// A learned policy, acting on its deterministic (mean) action.
    Agent(&'a dyn Agent),
    Rule,
    Random,
}

impl Controller<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Agent(a) => a.name(),
            Controller::Rule => "rule",
            Controller::Random => "random",
        }
    }

    pub fn action(
        &self,
        config: &EnvConfig,
        day: usize,
        state: &EnvState,
        obs: &[f64],
        rng: &mut dyn RngCore,
    ) -> Result<Action> {
        match self {
            Controller::Agent(a) => a.select_action(obs, ActionMode::Exploit, rng),
            Controller::Rule => Ok(rule_based_policy(config, day, state)),
            Controller::Random => Ok(random_action(rng)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rollout {
    /// One entry per evaluated day.
    pub returns: Vec<f64>,
    pub cash_costs_usd: Vec<f64>,
    pub trace: Vec<TraceRecord>,
}

impl Rollout {
    pub fn mean_return(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len().max(1) as f64
    }

    pub fn total_cash_cost(&self) -> f64 {
        self.cash_costs_usd.iter().sum()
    }
}

/// Runs one episode per entry of `days` on a fresh environment.
///
/// Environment randomness (loads, future-price draws) comes from its own
/// stream, so every controller evaluated with the same seed faces the same
/// days.
pub fn rollout(config: &EnvConfig, days: &[usize], controller: Controller<'_>, seed: u64) -> Result<Rollout> {
    let mut env = Env::new(config.clone())?;
    let mut env_rng = rng_stream(seed, stream::EVAL_ENV);
    let mut policy_rng = rng_stream(seed, stream::EVAL_POLICY);
    let mut result = Rollout::default();
    for &day in days {
        let mut state = env.reset(day, &mut env_rng);
        let (mut ret, mut cost) = (0.0, 0.0);
        while !env.is_done() {
            let obs = env.observe(&state);
            let action = controller.action(config, day, &state, &obs, &mut policy_rng)?;
            let outcome = env.step(action, &mut env_rng)?;
            ret += outcome.reward;
            cost += outcome.cash_cost_usd;
            state = outcome.next_state;
            result.trace.push(TraceRecord { day, action, outcome });
        }
        result.returns.push(ret);
        result.cash_costs_usd.push(cost);
    }
    Ok(result)
}
