//! Tanh-squashed diagonal Gaussian policy head.
//!
//! A network emits `2 * dim` values per state: means followed by raw
//! log-standard-deviations. Log-stds are clamped to `[log_std_min,
//! log_std_max]`. A pre-squash sample `x = mean + std * eps` is mapped to
//! `u = tanh(x)`, and
//!
//! ```text
//! log pi(u) = sum_j [ log N(x_j; mean_j, std_j) - log(1 - tanh(x_j)^2) ]
//! ```

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::net::DenseNet;

pub const DEFAULT_LOG_STD_MIN: f64 = -20.0;
pub const DEFAULT_LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianHead {
    pub dim: usize,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

/// One reparameterized draw for a single state.
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample {
    pub noise: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Whether each log-std was clamped (no gradient flows through it).
    pub clamped: Vec<bool>,
    pub pre_squash: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
}

/// Squashed actions are kept this far inside the open box, where
/// `tanh` would otherwise round to exactly +-1.
const BOX_MARGIN: f64 = 1e-15;

fn squash(x: f64) -> f64 {
    x.tanh().clamp(-1.0 + BOX_MARGIN, 1.0 - BOX_MARGIN)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(1 - tanh(x)^2)` without cancellation for large `|x|`.
pub fn log_one_minus_tanh_sq(x: f64) -> f64 {
    2.0 * (LN_2 - x - softplus(-2.0 * x))
}

impl GaussianHead {
    pub fn new(dim: usize) -> Self {
        GaussianHead {
            dim,
            log_std_min: DEFAULT_LOG_STD_MIN,
            log_std_max: DEFAULT_LOG_STD_MAX,
        }
    }

    pub fn output_size(&self) -> usize {
        2 * self.dim
    }

    fn split<'a>(&self, out: &'a [f64]) -> (&'a [f64], Vec<f64>, Vec<bool>) {
        let (mean, raw) = out.split_at(self.dim);
        let clamped = raw
            .iter()
            .map(|&s| s < self.log_std_min || s > self.log_std_max)
            .collect();
        let log_std = raw
            .iter()
            .map(|s| s.clamp(self.log_std_min, self.log_std_max))
            .collect();
        (mean, log_std, clamped)
    }

    /// Squashed mean: the deterministic action.
    pub fn mean_action(&self, out: &[f64]) -> Vec<f64> {
        out[..self.dim].iter().map(|&m| squash(m)).collect()
    }

    /// Draws a squashed action from the head output `out`.
    pub fn sample<R: Rng + ?Sized>(&self, out: &[f64], rng: &mut R) -> SquashedSample {
        let noise: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_with_noise(out, noise)
    }

    pub fn sample_with_noise(&self, out: &[f64], noise: Vec<f64>) -> SquashedSample {
        let (mean, log_std, clamped) = self.split(out);
        let pre_squash: Vec<f64> = (0..self.dim).map(|j| mean[j] + log_std[j].exp() * noise[j]).collect();
        let action = pre_squash.iter().map(|&x| squash(x)).collect();
        let log_prob = (0..self.dim)
            .map(|j| {
                -0.5 * noise[j] * noise[j] - log_std[j] - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(pre_squash[j])
            })
            .sum();
        SquashedSample {
            noise,
            log_std,
            clamped,
            pre_squash,
            action,
            log_prob,
        }
    }

    /// Density of a given squashed action `u` in `(-1, 1)^dim`.
    pub fn log_prob(&self, out: &[f64], action: &[f64]) -> f64 {
        let (mean, log_std, _) = self.split(out);
        (0..self.dim)
            .map(|j| {
                let x = action[j].atanh();
                let z = (x - mean[j]) / log_std[j].exp();
                -0.5 * z * z - log_std[j] - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(x)
            })
            .sum()
    }

    /// Gradient of `loss = f(action) + w * log_prob` with respect to the head
    /// output, given `d_action = df/d(action)` and `w = d_log_prob`, holding
    /// the noise fixed.
    pub fn backward(&self, sample: &SquashedSample, d_action: &[f64], d_log_prob: f64) -> Vec<f64> {
        let mut d_out = vec![0.0; 2 * self.dim];
        for j in 0..self.dim {
            let u = sample.action[j];
            let std = sample.log_std[j].exp();
            // d/dx of the loss through the squash and the tanh correction term.
            let d_x = d_action[j] * (1.0 - u * u) + d_log_prob * 2.0 * u;
            d_out[j] = d_x;
            if !sample.clamped[j] {
                d_out[self.dim + j] = d_x * std * sample.noise[j] - d_log_prob;
            }
        }
        d_out
    }
}

/// A network paired with a squashed-Gaussian head.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: DenseNet,
    pub head: GaussianHead,
}

impl GaussianPolicy {
    pub fn sample<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let out = self.net.forward(state)?;
        let s = self.head.sample(&out, rng);
        Ok((s.action, s.log_prob))
    }

    pub fn deterministic(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.head.mean_action(&self.net.forward(state)?))
    }
}
