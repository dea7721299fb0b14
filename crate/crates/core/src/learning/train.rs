//! Collect, estimate advantages, update; repeat.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::adam::Adam;
use super::checkpoint;
use super::gae::gae_advantages;
use super::network::{ForwardCache, NetworkSpec};
use super::policy::{policy_act, PolicyParams};
use super::ppo::{ppo_update, EpisodeSummary, PpoConfig, RolloutBatch, UpdateStats};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::math::{mix_seed, RngStream};

pub const TRAIN_LOG_HEADER: &str = "iter,mean_return,mean_ep_len,actor_loss,value_loss,entropy,kl";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub iterations: usize,
    /// Write `ckpt_NNNNN.bin` every this many iterations (0 disables the
    /// periodic files; the initial and final ones are always written).
    pub checkpoint_every: usize,
    pub seed: u64,
    /// Collect each environment on its own thread. Results do not depend
    /// on this flag.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            ppo: PpoConfig::default(),
            iterations: 100,
            checkpoint_every: 10,
            seed: 0,
            parallel: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    /// Mean undiscounted return of the episodes that finished during this
    /// iteration's collection; NaN when none did.
    pub mean_return: f64,
    pub mean_ep_len: f64,
    /// Fraction of finished episodes that ended in a failure termination.
    pub term_fraction: f64,
    pub stats: UpdateStats,
}

impl IterationLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.iter,
            self.mean_return,
            self.mean_ep_len,
            self.stats.actor_loss,
            self.stats.value_loss,
            self.stats.entropy,
            self.stats.kl
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: Vec<IterationLog>,
    pub final_params: PolicyParams,
    /// Parameters that collected the iteration with the highest mean return.
    pub best_params: PolicyParams,
    pub best_iter: Option<usize>,
    pub checkpoints: Vec<PathBuf>,
}

/// Per-environment state carried across iterations.
struct Worker<E> {
    env: E,
    idx: usize,
    rng: RngStream,
    obs: Vec<f64>,
    episodes: u64,
    ret: f64,
    len: usize,
    seed: u64,
}

impl<E: Environment> Worker<E> {
    fn begin_episode(&mut self, base: u64) -> Result<()> {
        self.seed = mix_seed(mix_seed(base, self.idx as u64), self.episodes);
        self.episodes += 1;
        self.obs.clear();
        self.obs.extend_from_slice(self.env.reset(self.seed)?);
        self.ret = 0.0;
        self.len = 0;
        Ok(())
    }

    /// Runs `steps` policy steps, continuing the episode in progress.
    fn collect(&mut self, policy: &PolicyParams, steps: usize, base: u64, reward_scale: f64) -> Result<RolloutBatch> {
        let act_dim = policy.act_dim();
        let mut batch = RolloutBatch::new(self.obs.len(), act_dim);
        let mut cache = ForwardCache::default();
        let mut pending = false;
        for t in 0..steps {
            let out = policy_act(policy, &self.obs, &mut self.rng, false, &mut cache)?;
            if pending {
                *batch.next_values.last_mut().unwrap() = out.value;
            }
            let obs = self.obs.clone();
            let tr = self.env.step(&out.action)?;
            self.obs.clear();
            self.obs.extend_from_slice(tr.obs);
            let (reward, terminated, truncated) = (tr.reward, tr.terminated, tr.truncated);
            self.ret += reward;
            self.len += 1;
            let last = t + 1 == steps;
            let next_value = if terminated {
                0.0
            } else if truncated || last {
                policy.net.forward(&policy.values, &self.obs, 1, &mut cache)?;
                cache.value[0]
            } else {
                f64::NAN
            };
            pending = !(terminated || truncated || last);
            let end = terminated || truncated || last;
            batch.push(&obs, &out.raw, out.log_prob.unwrap(), reward * reward_scale, out.value, next_value, terminated, end);
            if terminated || truncated {
                batch.episodes.push(EpisodeSummary {
                    seed: self.seed,
                    ret: self.ret,
                    len: self.len,
                    terminated,
                });
                self.begin_episode(base)?;
            }
        }
        Ok(batch)
    }
}

fn merge(parts: Vec<RolloutBatch>) -> RolloutBatch {
    let mut it = parts.into_iter();
    let mut all = it.next().unwrap_or_default();
    for b in it {
        all.obs.extend(b.obs);
        all.raw_actions.extend(b.raw_actions);
        all.log_probs.extend(b.log_probs);
        all.rewards.extend(b.rewards);
        all.values.extend(b.values);
        all.next_values.extend(b.next_values);
        all.terminated.extend(b.terminated);
        all.ends.extend(b.ends);
        all.episodes.extend(b.episodes);
    }
    all
}

/// Trains a policy on `envs`. Checkpoints and `train_log.csv` go to `out`
/// when given. With zero iterations only the initial checkpoint is written.
pub fn train<E: Environment + Send>(
    envs: Vec<E>,
    spec: NetworkSpec,
    cfg: &TrainConfig,
    out: Option<&Path>,
    mut progress: impl FnMut(&IterationLog),
) -> Result<TrainOutcome> {
    cfg.ppo.validate()?;
    if envs.is_empty() {
        return Err(Error::Config("training needs at least one environment".into()));
    }
    if envs.iter().any(|e| e.obs_len() != spec.obs_len()) {
        return Err(Error::Dimension(format!("environment observation length differs from network input {}", spec.obs_len())));
    }
    let mut init_rng = RngStream::derive(cfg.seed, 0);
    let mut policy = PolicyParams::new(spec, &mut init_rng, cfg.ppo.log_std_init);
    let mut opt = Adam::new(policy.values.len(), cfg.ppo.lr);
    let mut update_rng = RngStream::derive(cfg.seed, 1);
    let episode_base = mix_seed(cfg.seed, 2);

    let mut workers: Vec<Worker<E>> = envs
        .into_iter()
        .enumerate()
        .map(|(idx, env)| Worker {
            env,
            idx,
            rng: RngStream::derive(cfg.seed, 100 + idx as u64),
            obs: Vec::new(),
            episodes: 0,
            ret: 0.0,
            len: 0,
            seed: 0,
        })
        .collect();
    for w in &mut workers {
        w.begin_episode(episode_base)?;
    }

    let mut checkpoints = Vec::new();
    let mut log_file = None;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let p = dir.join("ckpt_00000.bin");
        checkpoint::save(&policy, &p)?;
        checkpoints.push(p);
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("train_log.csv"))?);
        writeln!(f, "{TRAIN_LOG_HEADER}")?;
        log_file = Some(f);
    }

    let mut log = Vec::with_capacity(cfg.iterations);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let steps = cfg.ppo.steps_per_env;
    for iter in 1..=cfg.iterations {
        let parts: Vec<RolloutBatch> = if cfg.parallel && workers.len() > 1 {
            let pol = &policy;
            std::thread::scope(|s| {
                let handles: Vec<_> = workers
                    .iter_mut()
                    .map(|w| s.spawn(move || w.collect(pol, steps, episode_base, cfg.ppo.reward_scale)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect::<Result<_>>()
            })?
        } else {
            workers
                .iter_mut()
                .map(|w| w.collect(&policy, steps, episode_base, cfg.ppo.reward_scale))
                .collect::<Result<_>>()?
        };
        let batch = merge(parts);
        let n_ep = batch.episodes.len();
        let (mean_return, mean_ep_len, term_fraction) = if n_ep == 0 {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let k = n_ep as f64;
            (
                batch.episodes.iter().map(|e| e.ret).sum::<f64>() / k,
                batch.episodes.iter().map(|e| e.len as f64).sum::<f64>() / k,
                batch.episodes.iter().filter(|e| e.terminated).count() as f64 / k,
            )
        };
        if mean_return.is_finite() && best.as_ref().is_none_or(|b| mean_return > b.0) {
            best = Some((mean_return, iter, policy.values.clone()));
        }

        let (adv, ret) = gae_advantages(
            &batch.rewards,
            &batch.values,
            &batch.next_values,
            &batch.terminated,
            &batch.ends,
            cfg.ppo.gamma,
            cfg.ppo.lam,
        );
        let stats = ppo_update(&mut policy, &mut opt, &batch, &adv, &ret, &cfg.ppo, &mut update_rng)?;
        let entry = IterationLog {
            iter,
            mean_return,
            mean_ep_len,
            term_fraction,
            stats,
        };
        progress(&entry);
        if let Some(f) = log_file.as_mut() {
            writeln!(f, "{}", entry.csv_row())?;
        }
        if let Some(dir) = out {
            if (cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0) || iter == cfg.iterations {
                let p = dir.join(format!("ckpt_{iter:05}.bin"));
                checkpoint::save(&policy, &p)?;
                checkpoints.push(p);
            }
        }
        log.push(entry);
    }

    let best_iter = best.as_ref().map(|b| b.1);
    let best_params = match best {
        Some((_, _, values)) => PolicyParams {
            net: policy.net.clone(),
            values,
        },
        None => policy.clone(),
    };
    if let Some(dir) = out {
        if cfg.iterations > 0 {
            checkpoint::save(&best_params, &dir.join("best.bin"))?;
        }
    }
    if let Some(mut f) = log_file {
        f.flush()?;
    }
    Ok(TrainOutcome {
        log,
        final_params: policy,
        best_params,
        best_iter,
        checkpoints,
    })
}

/// One-step two-armed bandit: the first action component picks the arm
/// (positive means arm A). Arm A pays 1, arm B pays 0. The observation is
/// a constant vector.
#[derive(Clone, Debug)]
pub struct BanditEnv {
    obs: Vec<f64>,
}

impl BanditEnv {
    pub fn new(obs_len: usize) -> Self {
        BanditEnv {
            obs: vec![1.0; obs_len],
        }
    }

    /// Network shape matching this environment: present block only.
    pub fn spec(&self, act_dim: usize) -> NetworkSpec {
        NetworkSpec {
            present: self.obs.len(),
            hist_in: 0,
            prev_in: 0,
            enc_hist: 0,
            enc_prev: 0,
            hidden: vec![16, 16],
            act_dim,
        }
    }

    /// Probability that the policy picks arm A.
    pub fn prob_arm_a(policy: &PolicyParams, obs_len: usize) -> Result<f64> {
        let mut cache = ForwardCache::default();
        policy.net.forward(&policy.values, &vec![1.0; obs_len], 1, &mut cache)?;
        let mu = cache.mean[0];
        let sigma = policy.log_std()[0].exp();
        // tanh preserves sign, so P(a > 0) = P(u > 0)
        Ok(0.5 * (1.0 + erf(mu / (sigma * std::f64::consts::SQRT_2))))
    }
}

impl Environment for BanditEnv {
    fn obs_len(&self) -> usize {
        self.obs.len()
    }

    fn reset(&mut self, _seed: u64) -> Result<&[f64]> {
        Ok(&self.obs)
    }

    fn step(&mut self, action: &[f64]) -> Result<crate::env::Transition<'_>> {
        Ok(crate::env::Transition {
            obs: &self.obs,
            reward: if action[0] > 0.0 { 1.0 } else { 0.0 },
            terminated: true,
            truncated: false,
        })
    }
}

/// Error function (Abramowitz and Stegun 7.1.26, |error| < 1.5e-7).
fn erf(x: f64) -> f64 {
    let s = x.signum();
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let y = 1.0
        - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736) * t + 0.254_829_592)
            * t
            * (-x * x).exp();
    s * y
}
