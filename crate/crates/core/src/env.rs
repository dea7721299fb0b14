//! Episodic quadrotor/payload environment: 100 Hz policy steps over five
//! 500 Hz simulation substeps of rate PID, mixer, rotor delay and lag, and
//! the hybrid dynamics.

use std::io::Write;

use crate::actuation::{map_action, mix_to_rotors, Action, MotorState, RateGains, RatePid, WrenchCommand};
use crate::dynamics::{
    ground_effect_force, step_detailed, CableMode, CableModel, Disturbance, ExternalLoad, SystemParams, SystemState,
    DEFAULT_DT,
};
use crate::error::{Error, Result};
use crate::math::{RngStream, Vec3};
use crate::randomization::{
    initial_state, randomize_params, sample_impulse_disturbance, sample_initial_perturbation, DisturbanceRanges,
    PerturbationRanges, RandomizationRanges,
};
use crate::reference::{quadrotor_reference, sample_reference_with, ReferenceRanges, ReferenceSample, ReferenceSpec};
use crate::reward::{check_termination, compute_reward, ActionHistory, RewardConfig, Termination, TerminationConfig};
use crate::sensing::{add_sensor_noise, assemble_observation, history_entry, HistoryBuffer, NoiseConfig, ObservationConfig};

/// Common interface used by the trainer.
pub trait Environment {
    fn obs_len(&self) -> usize;
    /// Starts a new episode and returns its first observation.
    fn reset(&mut self, seed: u64) -> Result<&[f64]>;
    /// Applies one action. The returned observation is the next one.
    fn step(&mut self, action: &[f64]) -> Result<Transition<'_>>;
}

#[derive(Debug)]
pub struct Transition<'a> {
    pub obs: &'a [f64],
    pub reward: f64,
    /// Failure termination: the next state has no value.
    pub terminated: bool,
    /// Time limit reached: the next state is bootstrapped.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceMode {
    /// Fresh windowed sinusoid each episode.
    Random(ReferenceRanges),
    /// Hover at the given payload position.
    Hover(Vec3),
    Fixed(ReferenceSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub nominal: SystemParams,
    pub model: CableModel,
    /// `None` keeps the nominal parameters every episode.
    pub randomization: Option<RandomizationRanges>,
    pub perturbation: PerturbationRanges,
    pub disturbance: Option<DisturbanceRanges>,
    pub noise: NoiseConfig,
    pub observation: ObservationConfig,
    pub reward: RewardConfig,
    pub termination: TerminationConfig,
    pub reference: ReferenceMode,
    pub episode_length: f64,
    pub substeps: usize,
    pub dt: f64,
    pub ground_effect: bool,
    pub rate_gains: RateGains,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            nominal: SystemParams::nominal(),
            model: CableModel::Compliant,
            randomization: Some(RandomizationRanges::default()),
            perturbation: PerturbationRanges::default(),
            disturbance: Some(DisturbanceRanges::default()),
            noise: NoiseConfig::default(),
            observation: ObservationConfig::default(),
            reward: RewardConfig::default(),
            termination: TerminationConfig::default(),
            reference: ReferenceMode::Random(ReferenceRanges::default()),
            episode_length: 25.0,
            substeps: 5,
            dt: DEFAULT_DT,
            ground_effect: true,
            rate_gains: RateGains::default(),
        }
    }
}

impl EnvConfig {
    pub fn policy_dt(&self) -> f64 {
        self.dt * self.substeps as f64
    }

    pub fn obs_len(&self) -> usize {
        self.observation.layout().len()
    }

    pub fn validate(&self) -> Result<()> {
        self.nominal.validate()?;
        if let Some(r) = &self.randomization {
            r.validate()?;
        }
        if !(self.dt > 0.0) || self.substeps == 0 || !(self.episode_length > 0.0) {
            return Err(Error::Config("dt, substeps and episode_length must be positive".into()));
        }
        Ok(())
    }
}

/// One 100 Hz log row.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub state: SystemState,
    pub wrench: WrenchCommand,
    pub reference: ReferenceSample,
}

pub const TRAJECTORY_HEADER: &str = "t,x_Q,y_Q,z_Q,vx_Q,vy_Q,vz_Q,r11,r12,r13,r21,r22,r23,r31,r32,r33,wx,wy,wz,\
x_P,y_P,z_P,vx_P,vy_P,vz_P,mode,f,Mx,My,Mz";

pub fn write_trajectory_csv<W: Write>(out: &mut W, rows: &[LogRow]) -> std::io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        let s = &r.state;
        let mut fields: Vec<String> = vec![r.t.to_string()];
        fields.extend(s.quad.x.iter().chain(s.quad.v.iter()).map(|x| x.to_string()));
        fields.extend(s.quad.rot.to_row_major().iter().map(|x| x.to_string()));
        fields.extend(s.quad.omega.iter().map(|x| x.to_string()));
        fields.extend(s.payload.x.iter().chain(s.payload.v.iter()).map(|x| x.to_string()));
        fields.push(s.mode.as_str().to_string());
        fields.push(r.wrench.f.to_string());
        fields.extend(r.wrench.moment.iter().map(|x| x.to_string()));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Mode change seen at simulation rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeEvent {
    pub t: f64,
    pub from: CableMode,
    pub to: CableMode,
    pub distance: f64,
}

pub struct QuadPayloadEnv {
    pub cfg: EnvConfig,
    params: SystemParams,
    state: SystemState,
    t: f64,
    pid: RatePid,
    motor: MotorState,
    history: HistoryBuffer,
    actions: ActionHistory,
    a_prev: Action,
    spec: ReferenceSpec,
    disturbance: Disturbance,
    noise_rng: RngStream,
    ground_rng: RngStream,
    obs: Vec<f64>,
    wrench: WrenchCommand,
    logging: bool,
    log: Vec<LogRow>,
    events: Vec<ModeEvent>,
    last_termination: Option<Termination>,
}

impl QuadPayloadEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.nominal.clone();
        let state = SystemState::hanging(Vec3::zeros(), &params, cfg.model);
        let spec = ReferenceSpec::hover(Vec3::zeros(), cfg.episode_length);
        Ok(QuadPayloadEnv {
            pid: RatePid::new(cfg.rate_gains.clone()),
            motor: MotorState::steady([0.0; 4]),
            history: HistoryBuffer::new(cfg.observation.history),
            actions: ActionHistory::new(cfg.reward.window),
            obs: Vec::with_capacity(cfg.obs_len()),
            cfg,
            params,
            state,
            t: 0.0,
            a_prev: Action::default(),
            spec,
            disturbance: Disturbance::default(),
            noise_rng: RngStream::new(0),
            ground_rng: RngStream::new(0),
            wrench: WrenchCommand::default(),
            logging: false,
            log: Vec::new(),
            events: Vec::new(),
            last_termination: None,
        })
    }

    pub fn set_logging(&mut self, on: bool) {
        self.logging = on;
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn mode_events(&self) -> &[ModeEvent] {
        &self.events
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn spec(&self) -> &ReferenceSpec {
        &self.spec
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn disturbance(&self) -> &Disturbance {
        &self.disturbance
    }

    pub fn last_termination(&self) -> Option<Termination> {
        self.last_termination
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    pub fn reference_at(&self, t: f64) -> Result<ReferenceSample> {
        quadrotor_reference(t, &self.spec, self.params.cable_length)
    }

    /// Starts an episode with explicit parameters, reference and state,
    /// bypassing the randomization. The actuators start in hover trim.
    pub fn reset_with(
        &mut self,
        params: SystemParams,
        spec: ReferenceSpec,
        state: SystemState,
        disturbance: Disturbance,
        seed: u64,
    ) -> Result<&[f64]> {
        params.validate()?;
        spec.validate()?;
        self.params = params;
        self.spec = spec;
        self.state = state;
        self.disturbance = disturbance;
        self.noise_rng = RngStream::derive(seed, 5);
        self.ground_rng = RngStream::derive(seed, 6);
        self.t = 0.0;
        self.pid = RatePid::new(self.cfg.rate_gains.clone());
        let hover_f = self.params.total_mass() * self.params.g;
        self.motor = MotorState::steady(mix_to_rotors(hover_f, &Vec3::zeros(), &self.params));
        self.wrench = WrenchCommand {
            f: hover_f,
            moment: Vec3::zeros(),
        };
        self.history.clear();
        self.actions.clear();
        self.a_prev = Action::hover(self.params.total_mass(), &self.params);
        self.actions.push(self.a_prev);
        self.log.clear();
        self.events.clear();
        self.last_termination = None;
        self.record()?;
        self.observe()?;
        Ok(&self.obs)
    }

    /// Draws the randomized episode setup for `seed` without applying it.
    pub fn draw_episode(&self, seed: u64) -> Result<(SystemParams, ReferenceSpec, SystemState, Disturbance)> {
        let cfg = &self.cfg;
        let mut rng_params = RngStream::derive(seed, 1);
        let mut rng_ref = RngStream::derive(seed, 2);
        let mut rng_init = RngStream::derive(seed, 3);
        let mut rng_dist = RngStream::derive(seed, 4);
        let params = match &cfg.randomization {
            Some(r) => randomize_params(&cfg.nominal, r, &mut rng_params),
            None => cfg.nominal.clone(),
        };
        let spec = match &cfg.reference {
            ReferenceMode::Random(r) => sample_reference_with(&mut rng_ref, cfg.episode_length, r)?,
            ReferenceMode::Hover(o) => ReferenceSpec::hover(*o, cfg.episode_length),
            ReferenceMode::Fixed(s) => s.clone(),
        };
        let r0 = quadrotor_reference(0.0, &spec, params.cable_length)?;
        let base = match &cfg.randomization {
            Some(r) => initial_state(r0.x_q, &params, cfg.model, r, &mut rng_init),
            None => SystemState::hanging(r0.x_q, &params, cfg.model),
        };
        let state = sample_initial_perturbation(&mut rng_init, &cfg.perturbation).apply(&base);
        let disturbance = match &cfg.disturbance {
            Some(d) => {
                let (lo, hi) = (spec.t_s.min(spec.t_f), spec.t_e.max(spec.t_s).min(spec.t_f));
                sample_impulse_disturbance(&mut rng_dist, d, lo, hi)
            }
            None => Disturbance::default(),
        };
        Ok((params, spec, state, disturbance))
    }

    fn record(&mut self) -> Result<()> {
        if self.logging {
            let reference = self.reference_at(self.t)?;
            self.log.push(LogRow {
                t: self.t,
                state: self.state,
                wrench: self.wrench,
                reference,
            });
        }
        Ok(())
    }

    /// Builds the observation for the current state, then appends the
    /// current entry to the history for the next step.
    fn observe(&mut self) -> Result<()> {
        let noisy = add_sensor_noise(&self.state, &self.cfg.noise, &mut self.noise_rng);
        assemble_observation(
            &noisy,
            &self.spec,
            self.t,
            &self.history,
            &self.a_prev,
            &self.params,
            &self.cfg.observation,
            &mut self.obs,
        )?;
        let r = self.reference_at(self.t)?;
        let entry = history_entry(&noisy, &r, &self.a_prev, &self.params, &self.cfg.observation);
        self.history.push(entry);
        Ok(())
    }

    fn external_load(&mut self) -> ExternalLoad {
        let mut load = self.disturbance.load_at(self.t);
        if self.cfg.ground_effect {
            load.force += ground_effect_force(self.state.quad.x.z, &mut self.ground_rng);
        }
        load
    }

    /// Advances the simulation by one substep with the given wrench request.
    fn substep(&mut self, f: f64, moment: Vec3) -> Result<()> {
        let dt = self.cfg.dt;
        let rotors = mix_to_rotors(f, &moment, &self.params);
        let applied = self.motor.step(&rotors, self.t, dt, &self.params);
        let load = self.external_load();
        let before = self.state.mode;
        let (next, _) = step_detailed(&self.state, &applied, &load, &self.params, self.cfg.model, dt).map_err(
            |e| match e {
                Error::Divergence { what, .. } => Error::Divergence { t: self.t, what },
                other => other,
            },
        )?;
        self.state = next;
        self.t += dt;
        if next.mode != before {
            self.events.push(ModeEvent {
                t: self.t,
                from: before,
                to: next.mode,
                distance: next.cable_distance(),
            });
        }
        self.wrench = WrenchCommand { f, moment };
        Ok(())
    }

    /// Policy step with a normalized CTBR action.
    pub fn step_action(&mut self, action: Action) -> Result<(f64, Option<Termination>, bool)> {
        let (f, omega_d) = map_action(&action, &self.params);
        for _ in 0..self.cfg.substeps {
            let m = self.pid.step(&self.state.quad.omega, &omega_d, self.cfg.dt);
            self.substep(f, m)?;
        }
        self.finish_step(action)
    }

    /// Control step driven by a wrench controller called at simulation rate.
    pub fn step_controller<C>(&mut self, controller: &mut C) -> Result<(f64, Option<Termination>, bool)>
    where
        C: FnMut(&SystemState, &ReferenceSample, &SystemParams) -> WrenchCommand,
    {
        for _ in 0..self.cfg.substeps {
            let r = self.reference_at(self.t)?;
            let w = controller(&self.state, &r, &self.params);
            self.substep(w.f, w.moment)?;
        }
        let hover = Action::hover(self.params.total_mass(), &self.params);
        self.finish_step(hover)
    }

    fn finish_step(&mut self, action: Action) -> Result<(f64, Option<Termination>, bool)> {
        self.actions.push(action);
        let r = self.reference_at(self.t)?;
        let (reward, _) = compute_reward(
            &self.state,
            &r,
            &action,
            &self.actions,
            self.params.cable_length,
            &self.cfg.reward,
        );
        let term = check_termination(&self.state, &r, &self.cfg.termination);
        self.last_termination = term;
        let truncated = self.t >= self.cfg.episode_length - 0.5 * self.cfg.dt;
        self.a_prev = action;
        self.record()?;
        self.observe()?;
        Ok((reward, term, truncated))
    }
}

impl Environment for QuadPayloadEnv {
    fn obs_len(&self) -> usize {
        self.cfg.obs_len()
    }

    fn reset(&mut self, seed: u64) -> Result<&[f64]> {
        let (p, s, st, d) = self.draw_episode(seed)?;
        self.reset_with(p, s, st, d, seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition<'_>> {
        if action.len() != 4 {
            return Err(Error::Dimension(format!("action of length {}", action.len())));
        }
        let a = Action::clipped([action[0], action[1], action[2], action[3]]);
        let (reward, term, truncated) = self.step_action(a)?;
        Ok(Transition {
            obs: &self.obs,
            reward,
            terminated: term.is_some(),
            truncated: truncated && term.is_none(),
        })
    }
}
