//! Clipped-surrogate PPO update.

use super::adam::{clip_grad_norm, Adam};
use super::gae::normalize;
use super::network::ForwardCache;
use super::policy::{gaussian_entropy, gaussian_log_prob, squash_correction, PolicyParams};
use crate::error::{Error, Result};
use crate::math::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub lr: f64,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub grad_clip: f64,
    /// Environment steps collected per environment and iteration.
    pub steps_per_env: usize,
    pub num_envs: usize,
    /// Multiplier applied to rewards before advantage estimation.
    pub reward_scale: f64,
    pub log_std_init: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            epochs: 10,
            minibatches: 4,
            lr: 3e-4,
            entropy_coeff: 1e-3,
            value_coeff: 0.5,
            grad_clip: 0.5,
            steps_per_env: 1024,
            num_envs: 4,
            reward_scale: 1.0,
            log_std_init: 0.3f64.ln(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.gamma) || !unit(self.lam) || !(self.clip_eps > 0.0) {
            return Err(Error::Config("gamma and lam must lie in (0, 1], clip_eps > 0".into()));
        }
        if self.epochs == 0 || self.minibatches == 0 || self.steps_per_env == 0 || self.num_envs == 0 {
            return Err(Error::Config("epochs, minibatches, steps_per_env and num_envs must be positive".into()));
        }
        if !(self.lr > 0.0) || !(self.grad_clip > 0.0) {
            return Err(Error::Config("lr and grad_clip must be positive".into()));
        }
        Ok(())
    }
}

/// Collected transitions, one row per step, environments concatenated in
/// index order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBatch {
    pub obs_len: usize,
    pub act_dim: usize,
    pub obs: Vec<f64>,
    /// Pre-squash actions.
    pub raw_actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    pub terminated: Vec<bool>,
    pub ends: Vec<bool>,
    pub episodes: Vec<EpisodeSummary>,
}

/// An episode completed during collection.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub ret: f64,
    pub len: usize,
    pub terminated: bool,
}

impl RolloutBatch {
    pub fn new(obs_len: usize, act_dim: usize) -> Self {
        RolloutBatch {
            obs_len,
            act_dim,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, obs: &[f64], raw: &[f64], log_prob: f64, reward: f64, value: f64, next_value: f64, terminated: bool, end: bool) {
        self.obs.extend_from_slice(obs);
        self.raw_actions.extend_from_slice(raw);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.next_values.push(next_value);
        self.terminated.push(terminated);
        self.ends.push(end);
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl: f64,
    pub clip_fraction: f64,
    /// Largest `|ratio - 1|` seen in the first minibatch of the first epoch.
    pub first_ratio_deviation: f64,
}

/// Per-sample clipped surrogate `min(r A, clip(r) A)` and its derivative
/// with respect to `r`.
pub fn clipped_surrogate(ratio: f64, adv: f64, clip_eps: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv;
    if unclipped <= clipped {
        (unclipped, adv)
    } else {
        (clipped, 0.0)
    }
}

/// Runs the minibatched PPO epochs on `policy`. Advantages are normalized
/// here. On a non-finite loss the parameters are restored and an error is
/// returned.
pub fn ppo_update(
    policy: &mut PolicyParams,
    opt: &mut Adam,
    batch: &RolloutBatch,
    advantages: &[f64],
    returns: &[f64],
    cfg: &PpoConfig,
    rng: &mut RngStream,
) -> Result<UpdateStats> {
    let n = batch.len();
    if n == 0 {
        return Ok(UpdateStats::default());
    }
    let backup = policy.values.clone();
    let result = run_epochs(policy, opt, batch, advantages, returns, cfg, rng);
    if result.is_err() {
        policy.values = backup;
    }
    result
}

fn run_epochs(
    policy: &mut PolicyParams,
    opt: &mut Adam,
    batch: &RolloutBatch,
    advantages: &[f64],
    returns: &[f64],
    cfg: &PpoConfig,
    rng: &mut RngStream,
) -> Result<UpdateStats> {
    let n = batch.len();
    let d = batch.obs_len;
    let k = batch.act_dim;
    let mut adv = advantages.to_vec();
    normalize(&mut adv);

    let mb_count = cfg.minibatches.min(n).max(1);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut cache = ForwardCache::default();
    let mut mb_obs = Vec::new();
    let mut grad = vec![0.0; policy.values.len()];
    let mut stats = UpdateStats::default();
    let mut updates = 0usize;

    for epoch in 0..cfg.epochs {
        // Fisher-Yates with the trainer's stream keeps the order reproducible
        for i in (1..n).rev() {
            let j = rng.index(i + 1);
            idx.swap(i, j);
        }
        for mb in 0..mb_count {
            let lo = mb * n / mb_count;
            let hi = (mb + 1) * n / mb_count;
            let rows = &idx[lo..hi];
            let b = rows.len();
            mb_obs.clear();
            for &r in rows {
                mb_obs.extend_from_slice(&batch.obs[r * d..(r + 1) * d]);
            }
            policy.net.forward(&policy.values, &mb_obs, b, &mut cache)?;
            let log_std: Vec<f64> = policy.log_std().to_vec();
            let inv_var: Vec<f64> = log_std.iter().map(|ls| (-2.0 * ls).exp()).collect();

            let mut d_mean = vec![0.0; b * k];
            let mut d_value = vec![0.0; b];
            let mut d_log_std = vec![-cfg.entropy_coeff; k];
            let (mut la, mut lv, mut kl, mut clipped) = (0.0, 0.0, 0.0, 0usize);
            let inv_b = 1.0 / b as f64;
            for (i, &r) in rows.iter().enumerate() {
                let u = &batch.raw_actions[r * k..(r + 1) * k];
                let mean = &cache.mean[i * k..(i + 1) * k];
                let logp = gaussian_log_prob(u, mean, &log_std) - squash_correction(u);
                let ratio = (logp - batch.log_probs[r]).exp();
                if epoch == 0 && mb == 0 {
                    stats.first_ratio_deviation = stats.first_ratio_deviation.max((ratio - 1.0).abs());
                }
                let (surr, d_surr_d_ratio) = clipped_surrogate(ratio, adv[r], cfg.clip_eps);
                la -= surr;
                if (ratio - 1.0).abs() > cfg.clip_eps {
                    clipped += 1;
                }
                kl += (ratio - 1.0) - ratio.ln();
                // d(-surr)/d logp = -dsurr/dratio * ratio
                let g = -d_surr_d_ratio * ratio * inv_b;
                for j in 0..k {
                    let diff = u[j] - mean[j];
                    d_mean[i * k + j] = g * diff * inv_var[j];
                    d_log_std[j] += g * (diff * diff * inv_var[j] - 1.0);
                }
                let verr = cache.value[i] - returns[r];
                lv += verr * verr;
                d_value[i] = 2.0 * cfg.value_coeff * verr * inv_b;
            }
            la *= inv_b;
            lv *= inv_b;
            let ent = gaussian_entropy(&log_std);
            let total = la + cfg.value_coeff * lv - cfg.entropy_coeff * ent;
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss(if la.is_finite() { "value" } else { "actor" }));
            }
            grad.fill(0.0);
            policy.net.backward(&policy.values, &cache, &d_mean, &d_value, &d_log_std, &mut grad);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss("gradient"));
            }
            clip_grad_norm(&mut grad, cfg.grad_clip);
            opt.step(&mut policy.values, &grad);

            stats.actor_loss += la;
            stats.value_loss += lv;
            stats.entropy += ent;
            stats.kl += kl * inv_b;
            stats.clip_fraction += clipped as f64 * inv_b;
            updates += 1;
        }
    }
    let u = updates.max(1) as f64;
    stats.actor_loss /= u;
    stats.value_loss /= u;
    stats.entropy /= u;
    stats.kl /= u;
    stats.clip_fraction /= u;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_one_gives_equal_surrogates() {
        for &a in &[-2.0, 0.0, 1.5] {
            let (s, g) = clipped_surrogate(1.0, a, 0.2);
            assert_eq!(s, a);
            assert_eq!(g, a);
        }
    }

    #[test]
    fn clip_boundary() {
        let (s, g) = clipped_surrogate(1.5, 2.0, 0.2);
        assert!((s - 2.4).abs() < 1e-15);
        assert_eq!(g, 0.0);
        // negative advantage keeps the pessimistic unclipped branch
        let (s, g) = clipped_surrogate(1.5, -1.0, 0.2);
        assert_eq!(s, -1.5);
        assert_eq!(g, -1.0);
    }
}
