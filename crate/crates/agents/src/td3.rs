//! Twin delayed deterministic policy gradient.
//!
//! ```text
//! a'      = clip(pi_targ(s') + clip(sigma * eps, -c, c), -1, 1)
//! critics: Q_i(s, a) -> scale * r + discount * (1 - d) * min_i Q_i,targ(s', a')
//! every `policy_delay` critic updates:
//!   actor: maximize Q1(s, pi(s)); all targets <- Polyak
//! ```

use diffnet::{mse_loss, Adam, DenseNet, Matrix};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::agent::{
    check_finite, first_column, layer_sizes, replace_network, validate_common, ActionMode, Agent, UpdateLosses,
};
use crate::error::{ensure, AgentError, Result};
use crate::replay::{Batch, ReplayBuffer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Config {
    pub discount: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub hidden: Vec<usize>,
    pub reward_scale: f64,
    /// Std of the target-policy smoothing noise.
    pub policy_noise: f64,
    pub noise_clip: f64,
    pub policy_delay: u32,
    /// Std of the Gaussian noise added when exploring.
    pub exploration_noise: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Td3Config {
            discount: 0.99,
            tau: 0.005,
            batch_size: 64,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            hidden: vec![64, 64],
            reward_scale: 1.0,
            policy_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            exploration_noise: 0.1,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        validate_common(
            self.discount,
            self.tau,
            self.batch_size,
            &[("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic)],
            &self.hidden,
        )?;
        ensure(
            self.reward_scale.is_finite() && self.reward_scale > 0.0,
            "reward_scale",
            "must be positive",
        )?;
        ensure(self.policy_noise >= 0.0, "policy_noise", "must be non-negative")?;
        ensure(self.noise_clip >= 0.0, "noise_clip", "must be non-negative")?;
        ensure(
            self.exploration_noise >= 0.0,
            "exploration_noise",
            "must be non-negative",
        )?;
        ensure(self.policy_delay >= 1, "policy_delay", "must be at least 1")
    }
}

fn squash(x: f64) -> f64 {
    x.tanh()
}

#[derive(Debug, Clone)]
pub struct Td3Agent {
    config: Td3Config,
    actor: DenseNet,
    actor_target: DenseNet,
    q1: DenseNet,
    q2: DenseNet,
    q1_target: DenseNet,
    q2_target: DenseNet,
    opt_actor: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    critic_updates: u64,
    actor_updates: u64,
}

impl Td3Agent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, config: Td3Config, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let actor = DenseNet::new(&layer_sizes(obs_dim, &config.hidden, act_dim), rng)?;
        let q1 = DenseNet::new(&layer_sizes(obs_dim + act_dim, &config.hidden, 1), rng)?;
        let q2 = DenseNet::new(&layer_sizes(obs_dim + act_dim, &config.hidden, 1), rng)?;
        Ok(Td3Agent {
            opt_actor: Adam::new(actor.param_count()),
            opt_q1: Adam::new(q1.param_count()),
            opt_q2: Adam::new(q2.param_count()),
            actor_target: actor.clone(),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            config,
            actor,
            q1,
            q2,
            critic_updates: 0,
            actor_updates: 0,
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.config
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    pub fn actor(&self) -> &DenseNet {
        &self.actor
    }

    fn policy(net: &DenseNet, states: &Matrix) -> Result<Matrix> {
        let mut out = net.forward_batch(states)?.output().clone();
        out.as_mut_slice().iter_mut().for_each(|x| *x = squash(*x));
        Ok(out)
    }

    /// Smoothed target actions for the next states.
    pub fn target_actions(&self, next_states: &Matrix, rng: &mut dyn RngCore) -> Result<Matrix> {
        let mut a = Self::policy(&self.actor_target, next_states)?;
        let (sigma, c) = (self.config.policy_noise, self.config.noise_clip);
        for x in a.as_mut_slice() {
            let eps: f64 = rng.sample(StandardNormal);
            *x = (*x + (sigma * eps).clamp(-c, c)).clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// Critic regression targets using the smaller of the two target critics.
    pub fn critic_targets(&self, batch: &Batch, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let next_actions = self.target_actions(&batch.next_states, rng)?;
        let sa = batch.next_states.hcat(&next_actions);
        let t1 = first_column(self.q1_target.forward_batch(&sa)?.output());
        let t2 = first_column(self.q2_target.forward_batch(&sa)?.output());
        Ok((0..batch.len())
            .map(|i| {
                let cont = if batch.dones[i] { 0.0 } else { 1.0 };
                self.config.reward_scale * batch.rewards[i] + self.config.discount * cont * t1[i].min(t2[i])
            })
            .collect())
    }

    /// `-mean Q1(s, pi(s))` and its actor-parameter gradient.
    pub fn actor_objective(&self, states: &Matrix) -> Result<(f64, Vec<f64>)> {
        let n = states.rows();
        let tape = self.actor.forward_batch(states)?;
        let mut actions = tape.output().clone();
        actions.as_mut_slice().iter_mut().for_each(|x| *x = squash(*x));
        let qt = self.q1.forward_batch(&states.hcat(&actions))?;
        let loss = -first_column(qt.output()).iter().sum::<f64>() / n as f64;
        let d_q = Matrix::from_vec(n, 1, vec![-1.0 / n as f64; n]);
        let (_, dx) = self.q1.backward(&qt, &d_q)?;
        let obs_dim = states.cols();
        let mut d_out = Matrix::zeros(n, actions.cols());
        for b in 0..n {
            for (j, g) in dx.row(b)[obs_dim..].iter().enumerate() {
                let u = actions.get(b, j);
                d_out.set(b, j, g * (1.0 - u * u));
            }
        }
        let (grads, _) = self.actor.backward(&tape, &d_out)?;
        Ok((loss, grads))
    }

    pub fn update_on_batch(&mut self, batch: &Batch, rng: &mut dyn RngCore) -> Result<UpdateLosses> {
        let lr_c = self.config.lr_critic;
        let targets = self.critic_targets(batch, rng)?;
        let sa = batch.states.hcat(&batch.actions);
        let (critic1, g1) = self.q1.grad(&sa, |o| mse_loss(o, &targets))?;
        self.opt_q1.step(self.q1.params_mut(), &g1, lr_c);
        let (critic2, g2) = self.q2.grad(&sa, |o| mse_loss(o, &targets))?;
        self.opt_q2.step(self.q2.params_mut(), &g2, lr_c);
        self.critic_updates += 1;

        let mut actor = None;
        if self.critic_updates.is_multiple_of(u64::from(self.config.policy_delay)) {
            let (loss, grads) = self.actor_objective(&batch.states)?;
            self.opt_actor
                .step(self.actor.params_mut(), &grads, self.config.lr_actor);
            let tau = self.config.tau;
            self.actor_target.polyak_update(&self.actor, tau)?;
            self.q1_target.polyak_update(&self.q1, tau)?;
            self.q2_target.polyak_update(&self.q2, tau)?;
            self.actor_updates += 1;
            actor = Some(loss);
        }
        check_finite(&self.networks(), self.critic_updates)?;
        Ok(UpdateLosses {
            critic1,
            critic2,
            value: None,
            actor,
            mean_log_prob: None,
        })
    }
}

impl Agent for Td3Agent {
    fn name(&self) -> &'static str {
        "td3"
    }

    fn batch_size(&self) -> usize {
        self.config.batch_size
    }

    fn act(&self, obs: &[f64], mode: ActionMode, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let out = self.actor.forward(obs)?;
        Ok(out
            .iter()
            .map(|&x| match mode {
                ActionMode::Exploit => squash(x),
                ActionMode::Explore => {
                    let eps: f64 = rng.sample(StandardNormal);
                    (squash(x) + self.config.exploration_noise * eps).clamp(-1.0, 1.0)
                }
            })
            .collect())
    }

    fn update(&mut self, buffer: &ReplayBuffer, rng: &mut dyn RngCore) -> Result<UpdateLosses> {
        let batch = buffer.sample(self.config.batch_size, rng)?;
        self.update_on_batch(&batch, rng)
    }

    fn networks(&self) -> Vec<(&'static str, &DenseNet)> {
        vec![
            ("actor", &self.actor),
            ("actor_target", &self.actor_target),
            ("q1", &self.q1),
            ("q2", &self.q2),
            ("q1_target", &self.q1_target),
            ("q2_target", &self.q2_target),
        ]
    }

    fn set_network(&mut self, name: &str, net: DenseNet) -> Result<()> {
        let slot = match name {
            "actor" => &mut self.actor,
            "actor_target" => &mut self.actor_target,
            "q1" => &mut self.q1,
            "q2" => &mut self.q2,
            "q1_target" => &mut self.q1_target,
            "q2_target" => &mut self.q2_target,
            _ => {
                return Err(AgentError::InvalidConfig {
                    key: name.into(),
                    reason: "unknown network".into(),
                })
            }
        };
        replace_network(slot, net, name)
    }
}
