//! Tanh-squashed diagonal Gaussian policy on top of [`Network`].

use super::network::{ForwardCache, Network, NetworkSpec};
use crate::error::Result;
use crate::math::RngStream;

const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Network layout together with its flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub net: Network,
    pub values: Vec<f64>,
}

impl PolicyParams {
    pub fn new(spec: NetworkSpec, rng: &mut RngStream, log_std: f64) -> Self {
        let net = Network::new(spec);
        let values = net.init_params(rng, log_std);
        PolicyParams { net, values }
    }

    pub fn zeros(spec: NetworkSpec) -> Self {
        let net = Network::new(spec);
        let values = vec![0.0; net.n_params];
        PolicyParams { net, values }
    }

    pub fn log_std(&self) -> &[f64] {
        &self.values[self.net.log_std..]
    }

    pub fn act_dim(&self) -> usize {
        self.net.spec.act_dim
    }
}

/// Log-density of `u` under `N(mean, exp(log_std)^2)`, summed over dims.
pub fn gaussian_log_prob(u: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    u.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((u, m), ls)| {
            let z = (u - m) * (-ls).exp();
            -0.5 * z * z - ls - LOG_SQRT_2PI
        })
        .sum()
}

/// `sum_i log(1 - tanh(u_i)^2)`, computed stably.
pub fn squash_correction(u: &[f64]) -> f64 {
    u.iter()
        .map(|&x| 2.0 * (std::f64::consts::LN_2 - x - softplus(-2.0 * x)))
        .sum()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Entropy of the pre-squash Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 + LOG_SQRT_2PI).sum()
}

/// Sampled (or deterministic) action with its bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct ActOutput {
    /// Squashed action in `[-1, 1]`.
    pub action: Vec<f64>,
    /// Pre-squash sample.
    pub raw: Vec<f64>,
    /// Log-probability of the squashed action; `None` in deterministic mode.
    pub log_prob: Option<f64>,
    pub value: f64,
}

/// Evaluates the policy on one observation. Stochastic mode samples the
/// Gaussian in pre-squash space and applies `tanh`; deterministic mode
/// returns `tanh(mean)`.
pub fn policy_act(
    policy: &PolicyParams,
    obs: &[f64],
    rng: &mut RngStream,
    deterministic: bool,
    cache: &mut ForwardCache,
) -> Result<ActOutput> {
    policy.net.forward(&policy.values, obs, 1, cache)?;
    let mean = &cache.mean;
    let log_std = policy.log_std();
    let raw: Vec<f64> = if deterministic {
        mean.clone()
    } else {
        mean.iter()
            .zip(log_std)
            .map(|(m, ls)| m + ls.exp() * rng.normal())
            .collect()
    };
    let action = raw.iter().map(|x| x.tanh().clamp(-1.0, 1.0)).collect();
    let log_prob = (!deterministic).then(|| gaussian_log_prob(&raw, mean, log_std) - squash_correction(&raw));
    Ok(ActOutput {
        action,
        raw,
        log_prob,
        value: cache.value[0],
    })
}
