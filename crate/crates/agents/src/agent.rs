use diffnet::{DenseNet, Matrix};
use evcs_core::Action;
use rand::RngCore;

use crate::error::{AgentError, Result};
use crate::replay::ReplayBuffer;

/// Observation width: normalized `(t, soc, price, ev_load)`.
pub const OBS_DIM: usize = 4;
/// Action width: `(a1, a2, a3)`.
pub const ACT_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Explore,
    Exploit,
}

/// Losses from one gradient update. Entries that were not updated are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateLosses {
    pub critic1: f64,
    pub critic2: f64,
    pub value: Option<f64>,
    pub actor: Option<f64>,
    pub mean_log_prob: Option<f64>,
}

pub trait Agent {
    fn name(&self) -> &'static str;

    fn batch_size(&self) -> usize;

    /// Action in policy space, each component in `[-1, 1]`.
    fn act(&self, obs: &[f64], mode: ActionMode, rng: &mut dyn RngCore) -> Result<Vec<f64>>;

    fn update(&mut self, buffer: &ReplayBuffer, rng: &mut dyn RngCore) -> Result<UpdateLosses>;

    /// Named networks, for checkpointing. The first entry is the actor.
    fn networks(&self) -> Vec<(&'static str, &DenseNet)>;

    /// Replaces the named network; the layer sizes must match.
    fn set_network(&mut self, name: &str, net: DenseNet) -> Result<()>;

    fn select_action(&self, obs: &[f64], mode: ActionMode, rng: &mut dyn RngCore) -> Result<Action> {
        Ok(to_env_action(&self.act(obs, mode, rng)?))
    }
}

/// Affine map from policy space `[-1, 1]^3` to the action box `[0, 1]^3`.
pub fn to_env_action(u: &[f64]) -> Action {
    Action::new((u[0] + 1.0) / 2.0, (u[1] + 1.0) / 2.0, (u[2] + 1.0) / 2.0).clamped()
}

pub(crate) fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

pub(crate) fn first_column(m: &Matrix) -> Vec<f64> {
    (0..m.rows()).map(|i| m.get(i, 0)).collect()
}

pub(crate) fn check_finite(nets: &[(&'static str, &DenseNet)], updates: u64) -> Result<()> {
    for (name, net) in nets {
        if !net.is_finite() {
            return Err(AgentError::NonFinite(name, updates));
        }
    }
    Ok(())
}

pub(crate) fn replace_network(slot: &mut DenseNet, net: DenseNet, name: &str) -> Result<()> {
    if slot.sizes() != net.sizes() {
        return Err(AgentError::InvalidConfig {
            key: name.to_string(),
            reason: format!("layer sizes {:?} do not match {:?}", net.sizes(), slot.sizes()),
        });
    }
    *slot = net;
    Ok(())
}

pub(crate) fn validate_common(
    discount: f64,
    tau: f64,
    batch_size: usize,
    lrs: &[(&str, f64)],
    hidden: &[usize],
) -> Result<()> {
    use crate::error::ensure;
    ensure(discount > 0.0 && discount <= 1.0, "discount", "must lie in (0, 1]")?;
    ensure(tau > 0.0 && tau <= 1.0, "tau", "must lie in (0, 1]")?;
    ensure(batch_size >= 1, "batch_size", "must be at least 1")?;
    for (key, lr) in lrs {
        ensure(lr.is_finite() && *lr > 0.0, key, "must be positive")?;
    }
    ensure(
        !hidden.is_empty() && !hidden.contains(&0),
        "hidden",
        "needs at least one non-empty hidden layer",
    )?;
    Ok(())
}
