//! Soft actor-critic with a separate state-value network and its Polyak
//! target (five networks: actor, two critics, value, target value).
//!
//! Per update, on a minibatch `(s, a, r, s', d)`:
//!
//! ```text
//! critics: Q_i(s, a)  ->  scale * r + discount * (1 - d) * V_targ(s')
//! value:   V(s)       ->  min_i Q_i(s, a~) - alpha * log pi(a~ | s),   a~ ~ pi(.|s)
//! actor:   minimize   mean[ alpha * log pi(a~ | s) - min_i Q_i(s, a~) ]
//! target:  V_targ     <-  tau * V + (1 - tau) * V_targ
//! ```

use diffnet::{mse_loss, Adam, DenseNet, GaussianHead, Matrix, SquashedSample};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::agent::{
    check_finite, first_column, layer_sizes, replace_network, validate_common, ActionMode, Agent, UpdateLosses,
};
use crate::error::{ensure, Result};
use crate::replay::{Batch, ReplayBuffer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub discount: f64,
    pub tau: f64,
    /// Fixed entropy coefficient.
    pub alpha: f64,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_value: f64,
    pub hidden: Vec<usize>,
    /// Multiplies rewards before they enter the critic targets.
    pub reward_scale: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            discount: 0.99,
            tau: 0.005,
            alpha: 0.2,
            batch_size: 64,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_value: 3e-4,
            hidden: vec![64, 64],
            reward_scale: 1.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        validate_common(
            self.discount,
            self.tau,
            self.batch_size,
            &[
                ("lr_actor", self.lr_actor),
                ("lr_critic", self.lr_critic),
                ("lr_value", self.lr_value),
            ],
            &self.hidden,
        )?;
        ensure(
            self.alpha.is_finite() && self.alpha >= 0.0,
            "alpha",
            "must be non-negative",
        )?;
        ensure(
            self.reward_scale.is_finite() && self.reward_scale > 0.0,
            "reward_scale",
            "must be positive",
        )
    }
}

/// Actor objective on a batch with the reparameterization noise fixed.
#[derive(Debug, Clone)]
pub struct ActorObjective {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// `min(Q1, Q2)` at the sampled actions.
    pub q_min: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SacAgent {
    config: SacConfig,
    head: GaussianHead,
    actor: DenseNet,
    q1: DenseNet,
    q2: DenseNet,
    value: DenseNet,
    value_target: DenseNet,
    opt_actor: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    opt_value: Adam,
    updates: u64,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, config: SacConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let head = GaussianHead::new(act_dim);
        let actor = DenseNet::new(&layer_sizes(obs_dim, &config.hidden, head.output_size()), rng)?;
        let q1 = DenseNet::new(&layer_sizes(obs_dim + act_dim, &config.hidden, 1), rng)?;
        let q2 = DenseNet::new(&layer_sizes(obs_dim + act_dim, &config.hidden, 1), rng)?;
        let value = DenseNet::new(&layer_sizes(obs_dim, &config.hidden, 1), rng)?;
        Ok(SacAgent {
            opt_actor: Adam::new(actor.param_count()),
            opt_q1: Adam::new(q1.param_count()),
            opt_q2: Adam::new(q2.param_count()),
            opt_value: Adam::new(value.param_count()),
            value_target: value.clone(),
            config,
            head,
            actor,
            q1,
            q2,
            value,
            updates: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn head(&self) -> &GaussianHead {
        &self.head
    }

    pub fn actor(&self) -> &DenseNet {
        &self.actor
    }

    pub fn critics(&self) -> (&DenseNet, &DenseNet) {
        (&self.q1, &self.q2)
    }

    pub fn value(&self) -> &DenseNet {
        &self.value
    }

    pub fn value_target(&self) -> &DenseNet {
        &self.value_target
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn obs_dim(&self) -> usize {
        self.actor.input_size()
    }

    /// Critic regression targets `scale * r + discount * (1 - d) * V_targ(s')`.
    pub fn critic_targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        let v_next = first_column(self.value_target.forward_batch(&batch.next_states)?.output());
        Ok((0..batch.len())
            .map(|i| {
                let cont = if batch.dones[i] { 0.0 } else { 1.0 };
                self.config.reward_scale * batch.rewards[i] + self.config.discount * cont * v_next[i]
            })
            .collect())
    }

    /// Evaluates the actor loss and its parameter gradient for the given
    /// standard-normal `noise` (one row per state).
    pub fn actor_objective(&self, states: &Matrix, noise: &Matrix) -> Result<ActorObjective> {
        let n = states.rows();
        let alpha = self.config.alpha;
        let tape = self.actor.forward_batch(states)?;
        let samples: Vec<SquashedSample> = (0..n)
            .map(|b| self.head.sample_with_noise(tape.output().row(b), noise.row(b).to_vec()))
            .collect();
        let actions = Matrix::from_rows(&samples.iter().map(|s| s.action.as_slice()).collect::<Vec<_>>());
        let sa = states.hcat(&actions);
        let t1 = self.q1.forward_batch(&sa)?;
        let t2 = self.q2.forward_batch(&sa)?;
        let (v1, v2) = (first_column(t1.output()), first_column(t2.output()));

        let mut d1 = Matrix::zeros(n, 1);
        let mut d2 = Matrix::zeros(n, 1);
        let mut q_min = Vec::with_capacity(n);
        let mut loss = 0.0;
        for b in 0..n {
            let q = if v1[b] <= v2[b] {
                d1.set(b, 0, -1.0 / n as f64);
                v1[b]
            } else {
                d2.set(b, 0, -1.0 / n as f64);
                v2[b]
            };
            q_min.push(q);
            loss += (alpha * samples[b].log_prob - q) / n as f64;
        }
        let (_, dx1) = self.q1.backward(&t1, &d1)?;
        let (_, dx2) = self.q2.backward(&t2, &d2)?;

        let obs_dim = states.cols();
        let mut d_head = Matrix::zeros(n, self.head.output_size());
        for b in 0..n {
            let d_action: Vec<f64> = dx1.row(b)[obs_dim..]
                .iter()
                .zip(&dx2.row(b)[obs_dim..])
                .map(|(x, y)| x + y)
                .collect();
            let g = self.head.backward(&samples[b], &d_action, alpha / n as f64);
            d_head.row_mut(b).copy_from_slice(&g);
        }
        let (grads, _) = self.actor.backward(&tape, &d_head)?;
        Ok(ActorObjective {
            loss,
            grads,
            log_probs: samples.iter().map(|s| s.log_prob).collect(),
            q_min,
        })
    }

    /// Value regression targets `min Q - alpha * log pi` from an actor objective.
    pub fn value_targets(&self, objective: &ActorObjective) -> Vec<f64> {
        objective
            .q_min
            .iter()
            .zip(&objective.log_probs)
            .map(|(q, lp)| q - self.config.alpha * lp)
            .collect()
    }

    pub fn update_on_batch(&mut self, batch: &Batch, rng: &mut dyn RngCore) -> Result<UpdateLosses> {
        let lr_c = self.config.lr_critic;
        let targets = self.critic_targets(batch)?;
        let sa = batch.states.hcat(&batch.actions);
        let (critic1, g1) = self.q1.grad(&sa, |o| mse_loss(o, &targets))?;
        self.opt_q1.step(self.q1.params_mut(), &g1, lr_c);
        let (critic2, g2) = self.q2.grad(&sa, |o| mse_loss(o, &targets))?;
        self.opt_q2.step(self.q2.params_mut(), &g2, lr_c);

        let n = batch.len();
        let act_dim = self.head.dim;
        let noise = Matrix::from_vec(
            n,
            act_dim,
            (0..n * act_dim).map(|_| rng.sample(StandardNormal)).collect(),
        );
        let objective = self.actor_objective(&batch.states, &noise)?;
        self.opt_actor
            .step(self.actor.params_mut(), &objective.grads, self.config.lr_actor);

        let v_targets = self.value_targets(&objective);
        let (value_loss, gv) = self.value.grad(&batch.states, |o| mse_loss(o, &v_targets))?;
        self.opt_value.step(self.value.params_mut(), &gv, self.config.lr_value);
        self.value_target.polyak_update(&self.value, self.config.tau)?;

        self.updates += 1;
        check_finite(&self.networks(), self.updates)?;
        Ok(UpdateLosses {
            critic1,
            critic2,
            value: Some(value_loss),
            actor: Some(objective.loss),
            mean_log_prob: Some(objective.log_probs.iter().sum::<f64>() / n as f64),
        })
    }

    /// State values `V(s)` for a batch of observations.
    pub fn state_values(&self, states: &Matrix) -> Result<Vec<f64>> {
        Ok(first_column(self.value.forward_batch(states)?.output()))
    }

    /// `Q1(s, a)` for one state-action pair.
    pub fn q1_value(&self, obs: &[f64], u: &[f64]) -> Result<f64> {
        debug_assert_eq!(obs.len(), self.obs_dim());
        let x: Vec<f64> = obs.iter().chain(u).copied().collect();
        Ok(self.q1.forward(&x)?[0])
    }
}

impl Agent for SacAgent {
    fn name(&self) -> &'static str {
        "sac"
    }

    fn batch_size(&self) -> usize {
        self.config.batch_size
    }

    fn act(&self, obs: &[f64], mode: ActionMode, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let out = self.actor.forward(obs)?;
        Ok(match mode {
            ActionMode::Exploit => self.head.mean_action(&out),
            ActionMode::Explore => self.head.sample(&out, rng).action,
        })
    }

    fn update(&mut self, buffer: &ReplayBuffer, rng: &mut dyn RngCore) -> Result<UpdateLosses> {
        let batch = buffer.sample(self.config.batch_size, rng)?;
        self.update_on_batch(&batch, rng)
    }

    fn networks(&self) -> Vec<(&'static str, &DenseNet)> {
        vec![
            ("actor", &self.actor),
            ("q1", &self.q1),
            ("q2", &self.q2),
            ("value", &self.value),
            ("value_target", &self.value_target),
        ]
    }

    fn set_network(&mut self, name: &str, net: DenseNet) -> Result<()> {
        let slot = match name {
            "actor" => &mut self.actor,
            "q1" => &mut self.q1,
            "q2" => &mut self.q2,
            "value" => &mut self.value,
            "value_target" => &mut self.value_target,
            _ => {
                return Err(crate::error::AgentError::InvalidConfig {
                    key: name.into(),
                    reason: "unknown network".into(),
                })
            }
        };
        replace_network(slot, net, name)
    }
}
