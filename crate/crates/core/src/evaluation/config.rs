//! TOML run configuration.
//!
//! Every section and key is optional; missing values take the defaults
//! below. Unknown keys are rejected so typos surface as errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::baseline::GeometricGains;
use crate::actuation::RateGains;
use crate::dynamics::{CableModel, SystemParams, DEFAULT_DT};
use crate::env::{EnvConfig, ReferenceMode};
use crate::error::{Error, Result};
use crate::learning::{NetworkSpec, PpoConfig, TrainConfig};
use crate::math::{Mat3, Vec3};
use crate::randomization::{DisturbanceRanges, PerturbationRanges, RandomizationRanges};
use crate::reference::ReferenceRanges;
use crate::reward::{RewardConfig, TerminationConfig};
use crate::sensing::{NoiseConfig, ObservationConfig};

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Rejects edits to the ranges taken from the published setup.
    pub strict_defaults: bool,
    pub sim: SimSection,
    pub vehicle: VehicleSection,
    pub rate_pid: RatePidSection,
    pub randomization: RandomizationSection,
    pub perturbation: PerturbationSection,
    pub disturbance: DisturbanceSection,
    pub noise: NoiseSection,
    pub observation: ObservationSection,
    pub reward: RewardSection,
    pub termination: TerminationSection,
    pub reference: ReferenceSection,
    pub baseline: BaselineSection,
    pub network: NetworkSection,
    pub ppo: PpoSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CableModelName {
    Ideal,
    Compliant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub substeps: usize,
    pub episode_length: f64,
    pub cable_model: CableModelName,
    pub ground_effect: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: DEFAULT_DT,
            substeps: 5,
            episode_length: 25.0,
            cable_model: CableModelName::Compliant,
            ground_effect: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSection {
    pub m_q: f64,
    /// Principal moments of inertia, kg m^2.
    pub inertia: [f64; 3],
    pub m_p: f64,
    pub cable_length: f64,
    pub f_max: f64,
    pub omega_max: f64,
    pub g: f64,
    pub cable_stiffness: f64,
    pub cable_damping: f64,
    pub arm_length: f64,
    pub torque_coeff: f64,
    pub rotor_tau_up: f64,
    pub rotor_tau_down: f64,
    pub delay: f64,
}

impl Default for VehicleSection {
    fn default() -> Self {
        let p = SystemParams::nominal();
        VehicleSection {
            m_q: p.m_q,
            inertia: [p.j_q[(0, 0)], p.j_q[(1, 1)], p.j_q[(2, 2)]],
            m_p: p.m_p,
            cable_length: p.cable_length,
            f_max: p.f_max,
            omega_max: p.omega_max,
            g: p.g,
            cable_stiffness: p.cable_stiffness,
            cable_damping: p.cable_damping,
            arm_length: p.arm_length,
            torque_coeff: p.torque_coeff,
            rotor_tau_up: p.rotor_tau_up,
            rotor_tau_down: p.rotor_tau_down,
            delay: p.delay,
        }
    }
}

impl VehicleSection {
    pub fn params(&self) -> SystemParams {
        SystemParams {
            m_q: self.m_q,
            j_q: Mat3::from_diagonal(&v3(self.inertia)),
            m_p: self.m_p,
            cable_length: self.cable_length,
            f_max: self.f_max,
            omega_max: self.omega_max,
            g: self.g,
            cable_stiffness: self.cable_stiffness,
            cable_damping: self.cable_damping,
            arm_length: self.arm_length,
            torque_coeff: self.torque_coeff,
            rotor_tau_up: self.rotor_tau_up,
            rotor_tau_down: self.rotor_tau_down,
            delay: self.delay,
            ..SystemParams::nominal()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatePidSection {
    pub kp: [f64; 3],
    pub ki: [f64; 3],
    pub kd: [f64; 3],
    pub integral_limit: [f64; 3],
    pub m_max: f64,
    pub m_min: f64,
}

impl Default for RatePidSection {
    fn default() -> Self {
        let g = RateGains::default();
        RatePidSection {
            kp: arr(&g.kp),
            ki: arr(&g.ki),
            kd: arr(&g.kd),
            integral_limit: arr(&g.integral_limit),
            m_max: g.m_max,
            m_min: g.m_min,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizationSection {
    pub enabled: bool,
    pub mass_scale: f64,
    pub inertia_scale: f64,
    /// Degrees.
    pub inertia_tilt_deg: f64,
    pub com_offset_max: f64,
    pub gear_scale: f64,
    pub m_p_range: [f64; 2],
    pub l_range: [f64; 2],
    pub rotor_tau_scale: f64,
    pub delay_range: [f64; 2],
    pub slack_probability: f64,
    pub slack_fraction: f64,
}

impl Default for RandomizationSection {
    fn default() -> Self {
        let r = RandomizationRanges::default();
        RandomizationSection {
            enabled: true,
            mass_scale: r.mass_scale,
            inertia_scale: r.inertia_scale,
            inertia_tilt_deg: r.inertia_tilt.to_degrees(),
            com_offset_max: r.com_offset_max,
            gear_scale: r.gear_scale,
            m_p_range: [r.m_p_range.0, r.m_p_range.1],
            l_range: [r.l_range.0, r.l_range.1],
            rotor_tau_scale: r.rotor_tau_scale,
            delay_range: [r.delay_range.0, r.delay_range.1],
            slack_probability: r.slack_probability,
            slack_fraction: r.slack_fraction,
        }
    }
}

impl RandomizationSection {
    pub fn ranges(&self) -> RandomizationRanges {
        RandomizationRanges {
            mass_scale: self.mass_scale,
            inertia_scale: self.inertia_scale,
            inertia_tilt: self.inertia_tilt_deg.to_radians(),
            com_offset_max: self.com_offset_max,
            gear_scale: self.gear_scale,
            m_p_range: (self.m_p_range[0], self.m_p_range[1]),
            l_range: (self.l_range[0], self.l_range[1]),
            rotor_tau_scale: self.rotor_tau_scale,
            delay_range: (self.delay_range[0], self.delay_range[1]),
            slack_probability: self.slack_probability,
            slack_fraction: self.slack_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSection {
    pub position: f64,
    pub velocity: f64,
    pub attitude: f64,
    pub body_rate: f64,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        let p = PerturbationRanges::default();
        PerturbationSection {
            position: p.position,
            velocity: p.velocity,
            attitude: p.attitude,
            body_rate: p.body_rate,
        }
    }
}

impl PerturbationSection {
    pub fn ranges(&self) -> PerturbationRanges {
        PerturbationRanges {
            position: self.position,
            velocity: self.velocity,
            attitude: self.attitude,
            body_rate: self.body_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSection {
    pub enabled: bool,
    pub force: f64,
    pub moment: f64,
    pub max_duration: f64,
}

impl Default for DisturbanceSection {
    fn default() -> Self {
        let d = DisturbanceRanges::default();
        DisturbanceSection {
            enabled: true,
            force: d.force,
            moment: d.moment,
            max_duration: d.max_duration,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub enabled: bool,
    pub sigma_x: f64,
    pub clip_x: f64,
    pub sigma_v: f64,
    pub clip_v: f64,
    pub sigma_theta: f64,
    pub clip_theta: f64,
    pub sigma_omega: f64,
    pub clip_omega: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseConfig::default();
        NoiseSection {
            enabled: true,
            sigma_x: n.sigma_x,
            clip_x: n.clip_x,
            sigma_v: n.sigma_v,
            clip_v: n.clip_v,
            sigma_theta: n.sigma_theta,
            clip_theta: n.clip_theta,
            sigma_omega: n.sigma_omega,
            clip_omega: n.clip_omega,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationSection {
    pub history: usize,
    pub preview: usize,
    pub pos_scale: f64,
    pub vel_scale: f64,
    pub privileged: bool,
}

impl Default for ObservationSection {
    fn default() -> Self {
        let o = ObservationConfig::default();
        ObservationSection {
            history: o.history,
            preview: o.preview,
            pos_scale: o.pos_scale,
            vel_scale: o.vel_scale,
            privileged: o.privileged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub weights: [f64; 6],
    pub scales: [f64; 6],
    pub rho: f64,
    pub window: usize,
}

impl Default for RewardSection {
    fn default() -> Self {
        let r = RewardConfig::default();
        RewardSection {
            weights: r.weights,
            scales: r.scales,
            rho: r.rho,
            window: r.window,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminationSection {
    pub eps_pos: f64,
    pub eps_vel: f64,
    pub attitude_limit: f64,
}

impl Default for TerminationSection {
    fn default() -> Self {
        let t = TerminationConfig::default();
        TerminationSection {
            eps_pos: t.eps_pos,
            eps_vel: t.eps_vel,
            attitude_limit: t.attitude_limit,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Random,
    Hover,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub kind: ReferenceKind,
    pub amplitude: [f64; 3],
    /// Hz.
    pub freq: [f64; 3],
    pub t_s: f64,
    pub end_margin: f64,
    pub delta: f64,
    pub v_max: f64,
    pub origin: [f64; 3],
}

impl Default for ReferenceSection {
    fn default() -> Self {
        let r = ReferenceRanges::default();
        ReferenceSection {
            kind: ReferenceKind::Random,
            amplitude: arr(&r.amplitude),
            freq: arr(&r.freq),
            t_s: r.t_s,
            end_margin: r.end_margin,
            delta: r.delta,
            v_max: r.v_max,
            origin: arr(&r.origin),
        }
    }
}

impl ReferenceSection {
    pub fn ranges(&self) -> ReferenceRanges {
        ReferenceRanges {
            amplitude: v3(self.amplitude),
            freq: v3(self.freq),
            t_s: self.t_s,
            end_margin: self.end_margin,
            delta: self.delta,
            v_max: self.v_max,
            origin: v3(self.origin),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub k_x: f64,
    pub k_v: f64,
    pub k_r: f64,
    pub k_omega: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let g = GeometricGains::default();
        BaselineSection {
            k_x: g.k_x,
            k_v: g.k_v,
            k_r: g.k_r,
            k_omega: g.k_omega,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub enc_hist: usize,
    pub enc_prev: usize,
    pub hidden: Vec<usize>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            enc_hist: 64,
            enc_prev: 32,
            hidden: vec![256, 256],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoSection {
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub lr: f64,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub grad_clip: f64,
    pub steps_per_env: usize,
    pub num_envs: usize,
    pub reward_scale: f64,
    pub log_std_init: f64,
}

impl Default for PpoSection {
    fn default() -> Self {
        let p = PpoConfig::default();
        PpoSection {
            gamma: p.gamma,
            lam: p.lam,
            clip_eps: p.clip_eps,
            epochs: p.epochs,
            minibatches: p.minibatches,
            lr: p.lr,
            entropy_coeff: p.entropy_coeff,
            value_coeff: p.value_coeff,
            grad_clip: p.grad_clip,
            steps_per_env: p.steps_per_env,
            num_envs: p.num_envs,
            reward_scale: p.reward_scale,
            log_std_init: p.log_std_init,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub iterations: usize,
    pub checkpoint_every: usize,
    pub parallel: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            iterations: 100,
            checkpoint_every: 10,
            parallel: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub settle_eps: f64,
    pub settle_tau: f64,
    /// Length of the hover-recovery and drop runs, s.
    pub recovery_duration: f64,
    /// Grid for `grid_sweep`: `[min, max, count]`.
    pub grid_m_p: [f64; 3],
    pub grid_l: [f64; 3],
    pub seeds: usize,
    pub ablation_history: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            settle_eps: super::metrics::SETTLING_EPS,
            settle_tau: super::metrics::SETTLING_TAU,
            recovery_duration: 10.0,
            grid_m_p: [0.0, 0.2, 5.0],
            grid_l: [0.0, 1.0, 5.0],
            seeds: 3,
            ablation_history: vec![0, 1, 5, 10],
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Quadrotor-only hover with noise off and narrow randomization: the
    /// scaled-down training task.
    pub fn hover_training() -> Self {
        let mut c = Config::default();
        c.vehicle.m_p = 0.0;
        c.vehicle.cable_length = 0.0;
        c.sim.episode_length = 5.0;
        c.randomization = RandomizationSection {
            enabled: true,
            mass_scale: 0.05,
            inertia_scale: 0.0,
            inertia_tilt_deg: 0.0,
            com_offset_max: 0.0,
            gear_scale: 0.0,
            m_p_range: [0.0, 0.0],
            l_range: [0.0, 0.0],
            rotor_tau_scale: 0.0,
            delay_range: [c.vehicle.delay, c.vehicle.delay],
            slack_probability: 0.0,
            slack_fraction: 0.7,
        };
        c.disturbance.enabled = false;
        c.noise.enabled = false;
        c.reference.kind = ReferenceKind::Hover;
        c.ppo.epochs = 4;
        c.ppo.minibatches = 16;
        c.ppo.reward_scale = 0.05;
        c.train.iterations = 122;
        c.train.checkpoint_every = 20;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.strict_defaults {
            let d = Config::default();
            let fixed = [
                ("randomization.m_p_range", self.randomization.m_p_range == d.randomization.m_p_range),
                ("randomization.l_range", self.randomization.l_range == d.randomization.l_range),
                ("randomization.delay_range", self.randomization.delay_range == d.randomization.delay_range),
                ("perturbation", self.perturbation == d.perturbation),
                ("disturbance", self.disturbance == d.disturbance),
                ("noise", self.noise == d.noise),
                ("sim.dt", self.sim.dt == d.sim.dt),
                ("sim.substeps", self.sim.substeps == d.sim.substeps),
            ];
            if let Some((key, _)) = fixed.iter().find(|(_, ok)| !ok) {
                return Err(Error::Config(format!("`{key}` is fixed when strict_defaults = true")));
            }
        }
        let grid_ok = |g: &[f64; 3]| g[0] <= g[1] && g[2] >= 1.0 && g[2].fract() == 0.0;
        if !grid_ok(&self.eval.grid_m_p) || !grid_ok(&self.eval.grid_l) {
            return Err(Error::Config("eval grids are [min, max, count] with count a positive integer".into()));
        }
        if self.network.hidden.is_empty() || self.network.hidden.contains(&0) {
            return Err(Error::Config("network.hidden needs at least one non-zero width".into()));
        }
        self.env_config()?;
        self.train_config(0).ppo.validate()
    }

    pub fn params(&self) -> SystemParams {
        self.vehicle.params()
    }

    pub fn cable_model(&self) -> CableModel {
        match self.sim.cable_model {
            CableModelName::Ideal => CableModel::Ideal,
            CableModelName::Compliant => CableModel::Compliant,
        }
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        let n = &self.noise;
        let o = &self.observation;
        let r = &self.rate_pid;
        let cfg = EnvConfig {
            nominal: self.params(),
            model: self.cable_model(),
            randomization: self.randomization.enabled.then(|| self.randomization.ranges()),
            perturbation: self.perturbation.ranges(),
            disturbance: self.disturbance.enabled.then(|| DisturbanceRanges {
                force: self.disturbance.force,
                moment: self.disturbance.moment,
                max_duration: self.disturbance.max_duration,
            }),
            noise: if n.enabled {
                NoiseConfig {
                    sigma_x: n.sigma_x,
                    clip_x: n.clip_x,
                    sigma_v: n.sigma_v,
                    clip_v: n.clip_v,
                    sigma_theta: n.sigma_theta,
                    clip_theta: n.clip_theta,
                    sigma_omega: n.sigma_omega,
                    clip_omega: n.clip_omega,
                }
            } else {
                NoiseConfig::off()
            },
            observation: ObservationConfig {
                history: o.history,
                preview: o.preview,
                pos_scale: o.pos_scale,
                vel_scale: o.vel_scale,
                privileged: o.privileged,
                visible_history: None,
            },
            reward: RewardConfig {
                weights: self.reward.weights,
                scales: self.reward.scales,
                rho: self.reward.rho,
                window: self.reward.window,
            },
            termination: TerminationConfig {
                eps_pos: self.termination.eps_pos,
                eps_vel: self.termination.eps_vel,
                attitude_limit: self.termination.attitude_limit,
            },
            reference: match self.reference.kind {
                ReferenceKind::Random => ReferenceMode::Random(self.reference.ranges()),
                ReferenceKind::Hover => ReferenceMode::Hover(v3(self.reference.origin)),
            },
            episode_length: self.sim.episode_length,
            substeps: self.sim.substeps,
            dt: self.sim.dt,
            ground_effect: self.sim.ground_effect,
            rate_gains: RateGains {
                kp: v3(r.kp),
                ki: v3(r.ki),
                kd: v3(r.kd),
                integral_limit: v3(r.integral_limit),
                m_max: r.m_max,
                m_min: r.m_min,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn network_spec(&self) -> Result<NetworkSpec> {
        let layout = self.env_config()?.observation.layout();
        Ok(NetworkSpec {
            enc_hist: self.network.enc_hist,
            enc_prev: self.network.enc_prev,
            hidden: self.network.hidden.clone(),
            ..NetworkSpec::for_layout(&layout)
        })
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let p = &self.ppo;
        TrainConfig {
            ppo: PpoConfig {
                gamma: p.gamma,
                lam: p.lam,
                clip_eps: p.clip_eps,
                epochs: p.epochs,
                minibatches: p.minibatches,
                lr: p.lr,
                entropy_coeff: p.entropy_coeff,
                value_coeff: p.value_coeff,
                grad_clip: p.grad_clip,
                steps_per_env: p.steps_per_env,
                num_envs: p.num_envs,
                reward_scale: p.reward_scale,
                log_std_init: p.log_std_init,
            },
            iterations: self.train.iterations,
            checkpoint_every: self.train.checkpoint_every,
            seed,
            parallel: self.train.parallel,
        }
    }

    pub fn gains(&self) -> GeometricGains {
        GeometricGains {
            k_x: self.baseline.k_x,
            k_v: self.baseline.k_v,
            k_r: self.baseline.k_r,
            k_omega: self.baseline.k_omega,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.params(), SystemParams::nominal());
        assert_eq!(c.env_config().unwrap(), EnvConfig::default());
        assert_eq!(c.train_config(0).ppo, PpoConfig::default());
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(Config::from_toml_str("[sim]\ndtt = 0.001\n"), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml_str("[simm]\n"), Err(Error::Config(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::hover_training();
        assert_eq!(Config::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn strict_defaults_locks_ranges() {
        assert!(Config::from_toml_str("strict_defaults = true\n").is_ok());
        let err = Config::from_toml_str("strict_defaults = true\n[randomization]\nl_range = [0.0, 2.0]\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn values_are_applied() {
        let c = Config::from_toml_str("[vehicle]\nm_q = 1.2\n[sim]\ncable_model = \"ideal\"\n").unwrap();
        assert_eq!(c.params().m_q, 1.2);
        assert_eq!(c.cable_model(), CableModel::Ideal);
    }
}
