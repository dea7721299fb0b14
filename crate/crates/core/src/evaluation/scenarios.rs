//! Evaluation scenarios and their CSV outputs.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::baseline::{geometric_control, GeometricGains};
use super::config::Config;
use super::metrics::{rmse_metrics, settling_metrics, TrackingMetrics};
use crate::actuation::Action;
use crate::dynamics::{CableMode, CableModel, Disturbance, QuadrotorState, SystemParams, SystemState};
use crate::env::{write_trajectory_csv, EnvConfig, LogRow, ModeEvent, QuadPayloadEnv};
use crate::error::{Error, Result};
use crate::learning::{policy_act, ForwardCache, PolicyParams};
use crate::math::{e3, RngStream, Rot3, Vec3};
use crate::randomization::{sample_initial_perturbation, PerturbationRanges};
use crate::reference::{quadrotor_reference, sample_reference_with, ReferenceSpec};
use crate::reward::Termination;

/// Closed-loop controller driving a scenario.
#[derive(Clone, Debug)]
pub enum Controller {
    Baseline(GeometricGains),
    Policy(Box<PolicyParams>),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Baseline(_) => "baseline",
            Controller::Policy(_) => "policy",
        }
    }
}

/// Everything needed to start one deterministic run.
#[derive(Clone, Debug)]
pub struct RunSetup {
    pub params: SystemParams,
    pub spec: ReferenceSpec,
    pub state: SystemState,
    pub disturbance: Disturbance,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub log: Vec<LogRow>,
    pub events: Vec<ModeEvent>,
    pub metrics: TrackingMetrics,
    pub termination: Option<Termination>,
    pub params: SystemParams,
}

impl RunResult {
    /// Payload position error norm at each log row.
    pub fn error_norms(&self) -> Vec<f64> {
        self.log
            .iter()
            .map(|r| (r.state.payload.x - r.reference.x_p).norm())
            .collect()
    }
}

/// Runs one episode to its time limit or a termination.
pub fn run_episode(env_cfg: &EnvConfig, setup: RunSetup, controller: &Controller, eps: f64, tau: f64) -> Result<RunResult> {
    let mut env = QuadPayloadEnv::new(env_cfg.clone())?;
    env.set_logging(true);
    let params = setup.params.clone();
    env.reset_with(setup.params, setup.spec, setup.state, setup.disturbance, setup.seed)?;
    let termination;
    match controller {
        Controller::Baseline(gains) => loop {
            let mut law = |s: &SystemState, r: &_, p: &SystemParams| geometric_control(s, r, p, gains);
            let (_, term, truncated) = env.step_controller(&mut law)?;
            if term.is_some() || truncated {
                termination = term;
                break;
            }
        },
        Controller::Policy(policy) => {
            if policy.net.spec.obs_len() != env.cfg.obs_len() {
                return Err(Error::Dimension(format!(
                    "policy expects {} observation values, scenario provides {}",
                    policy.net.spec.obs_len(),
                    env.cfg.obs_len()
                )));
            }
            let mut cache = ForwardCache::default();
            let mut rng = RngStream::new(setup.seed);
            loop {
                let out = policy_act(policy, env.observation(), &mut rng, true, &mut cache)?;
                let a = Action::clipped([out.action[0], out.action[1], out.action[2], out.action[3]]);
                let (_, term, truncated) = env.step_action(a)?;
                if term.is_some() || truncated {
                    termination = term;
                    break;
                }
            }
        }
    }
    let log = env.log().to_vec();
    let actual: Vec<Vec3> = log.iter().map(|r| r.state.payload.x).collect();
    let reference: Vec<Vec3> = log.iter().map(|r| r.reference.x_p).collect();
    let mut metrics = rmse_metrics(&actual, &reference)?;
    let e: Vec<f64> = actual.iter().zip(&reference).map(|(a, r)| (a - r).norm()).collect();
    let dt = env_cfg.policy_dt();
    match settling_metrics(&e, dt, params.cable_length, params.g, eps, tau) {
        // a terminated run has not settled whatever its last samples show
        Ok(s) if termination.is_some() => metrics.e_ss = s.e_ss,
        Ok(s) => {
            metrics.t_s = s.t_s;
            metrics.t_s_over_t_n = s.t_s_over_t_n;
            metrics.e_ss = s.e_ss;
        }
        Err(Error::SeriesTooShort { .. }) => metrics.e_ss = f64::NAN,
        Err(e) => return Err(e),
    }
    Ok(RunResult {
        log,
        events: env.mode_events().to_vec(),
        metrics,
        termination,
        params,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    TrackNoPayload,
    TrackPayload,
    HoverRecovery,
    SlackTautDrop,
    GridSweep,
    HistoryAblation,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::TrackNoPayload,
        Scenario::TrackPayload,
        Scenario::HoverRecovery,
        Scenario::SlackTautDrop,
        Scenario::GridSweep,
        Scenario::HistoryAblation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::TrackNoPayload => "track_no_payload",
            Scenario::TrackPayload => "track_payload",
            Scenario::HoverRecovery => "hover_recovery",
            Scenario::SlackTautDrop => "slack_taut_drop",
            Scenario::GridSweep => "grid_sweep",
            Scenario::HistoryAblation => "history_ablation",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

pub const METRICS_HEADER: &str =
    "scenario,controller,seed,m_p,l,history,rmse_x,rmse_y,rmse_z,rmse_total,mean_norm,t_s,t_s_over_t_n,e_ss,termination,mode_events";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub scenario: &'static str,
    pub controller: &'static str,
    pub seed: u64,
    pub m_p: f64,
    pub l: f64,
    pub history: Option<usize>,
    pub metrics: TrackingMetrics,
    pub termination: Option<Termination>,
    pub mode_events: usize,
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.controller,
            self.seed,
            self.m_p,
            self.l,
            self.history.map_or_else(String::new, |h| h.to_string()),
            m.rmse_x,
            m.rmse_y,
            m.rmse_z,
            m.rmse_total,
            m.mean_norm,
            opt(m.t_s),
            opt(m.t_s_over_t_n),
            m.e_ss,
            self.termination.map_or("none", |t| t.as_str()),
            self.mode_events
        )
    }
}

pub fn write_metrics_csv<W: Write>(out: &mut W, rows: &[MetricsRow]) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

pub const EVENTS_HEADER: &str = "t,from,to,distance";

pub fn write_events_csv<W: Write>(out: &mut W, events: &[ModeEvent]) -> std::io::Result<()> {
    writeln!(out, "{EVENTS_HEADER}")?;
    for e in events {
        writeln!(out, "{},{},{},{}", e.t, e.from.as_str(), e.to.as_str(), e.distance)?;
    }
    Ok(())
}

/// Result of a scenario over several seeds. `runs` holds the full logs
/// except for the grid sweep, which keeps metrics only.
#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub rows: Vec<MetricsRow>,
    pub runs: Vec<RunResult>,
}

/// Evaluation environment: no randomization, disturbance or start
/// perturbation; everything else from `cfg`.
fn eval_env(cfg: &Config) -> Result<EnvConfig> {
    let mut env = cfg.env_config()?;
    env.randomization = None;
    env.disturbance = None;
    env.perturbation = PerturbationRanges::zero();
    Ok(env)
}

fn tracking_setup(env: &EnvConfig, cfg: &Config, params: SystemParams, seed: u64) -> Result<RunSetup> {
    let mut rng = RngStream::derive(seed, 2);
    let spec = sample_reference_with(&mut rng, env.episode_length, &cfg.reference.ranges())?;
    let r0 = quadrotor_reference(0.0, &spec, params.cable_length)?;
    let state = SystemState::hanging(r0.x_q, &params, env.model);
    Ok(RunSetup {
        params,
        spec,
        state,
        disturbance: Disturbance::default(),
        seed,
    })
}

/// Hover at the reference origin after a start perturbation drawn from the
/// configured box.
pub fn hover_recovery_setup(env: &EnvConfig, cfg: &Config, params: SystemParams, seed: u64) -> Result<RunSetup> {
    let origin = Vec3::from(cfg.reference.origin);
    let spec = ReferenceSpec::hover(origin, env.episode_length);
    let r0 = quadrotor_reference(0.0, &spec, params.cable_length)?;
    let base = SystemState::hanging(r0.x_q, &params, env.model);
    let mut rng = RngStream::derive(seed, 3);
    let state = sample_initial_perturbation(&mut rng, &cfg.perturbation.ranges()).apply(&base);
    Ok(RunSetup {
        params,
        spec,
        state,
        disturbance: Disturbance::default(),
        seed,
    })
}

/// Fraction of the cable length the payload starts below the quadrotor in
/// the drop scenario.
pub const DROP_FRACTION: f64 = 0.3;

/// Payload released at rest `DROP_FRACTION * l` below a level, hovering
/// quadrotor, well inside the taut distance. A small seeded lateral offset
/// makes seeds differ.
pub fn drop_setup(env: &EnvConfig, cfg: &Config, params: SystemParams, seed: u64) -> Result<RunSetup> {
    if !params.has_payload() {
        return Err(Error::InvalidParams("the drop scenario needs a payload and a cable".into()));
    }
    let origin = Vec3::from(cfg.reference.origin);
    let spec = ReferenceSpec::hover(origin, env.episode_length);
    let x_q = origin + params.cable_length * e3();
    let mut rng = RngStream::derive(seed, 3);
    let lateral = Vec3::new(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.0);
    let quad = QuadrotorState {
        x: x_q,
        v: Vec3::zeros(),
        rot: Rot3::identity(),
        omega: Vec3::zeros(),
    };
    let x_p = x_q - DROP_FRACTION * params.cable_length * e3() + lateral;
    let state = SystemState::with_payload_at(quad, x_p, &params);
    debug_assert_eq!(state.mode, CableMode::Slack);
    Ok(RunSetup {
        params,
        spec,
        state,
        disturbance: Disturbance::default(),
        seed,
    })
}

/// `count` evenly spaced values over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `(m_P, l)` cells in row-major order over the given grids.
pub fn grid_cells(m_p: &[f64], l: &[f64]) -> Vec<(f64, f64)> {
    m_p.iter().flat_map(|&m| l.iter().map(move |&l| (m, l))).collect()
}

fn row(scenario: Scenario, controller: &Controller, seed: u64, history: Option<usize>, run: &RunResult) -> MetricsRow {
    MetricsRow {
        scenario: scenario.as_str(),
        controller: controller.name(),
        seed,
        m_p: run.params.m_p,
        l: run.params.cable_length,
        history,
        metrics: run.metrics,
        termination: run.termination,
        mode_events: run.events.len(),
    }
}

/// Tracking runs over the `(m_P, l)` grid, cells in index order, seeds
/// innermost.
pub fn run_grid(cfg: &Config, controller: &Controller, cells: &[(f64, f64)], seeds: &[u64]) -> Result<Vec<MetricsRow>> {
    let env = eval_env(cfg)?;
    let (eps, tau) = (cfg.eval.settle_eps, cfg.eval.settle_tau);
    let mut rows = Vec::with_capacity(cells.len() * seeds.len());
    for &(m_p, l) in cells {
        for &seed in seeds {
            let params = cfg.params().with_payload(m_p, l);
            let run = run_episode(&env, tracking_setup(&env, cfg, params, seed)?, controller, eps, tau)?;
            rows.push(row(Scenario::GridSweep, controller, seed, None, &run));
        }
    }
    Ok(rows)
}

/// Runs `scenario` for every seed and, when `out` is given, writes the
/// metrics CSV plus per-seed trajectory (and mode-event) CSVs there.
pub fn run_scenario(scenario: Scenario, cfg: &Config, controller: &Controller, seeds: &[u64], out: Option<&Path>) -> Result<ScenarioReport> {
    let mut env = eval_env(cfg)?;
    let (eps, tau) = (cfg.eval.settle_eps, cfg.eval.settle_tau);
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut keep = |history: Option<usize>, seed: u64, run: RunResult| {
        rows.push(row(scenario, controller, seed, history, &run));
        runs.push((history, seed, run));
    };
    match scenario {
        Scenario::TrackNoPayload | Scenario::TrackPayload => {
            let params = if scenario == Scenario::TrackNoPayload {
                cfg.params().with_payload(0.0, 0.0)
            } else {
                cfg.params().with_payload(0.2, 1.0)
            };
            for &seed in seeds {
                let setup = tracking_setup(&env, cfg, params.clone(), seed)?;
                keep(None, seed, run_episode(&env, setup, controller, eps, tau)?);
            }
        }
        Scenario::HoverRecovery => {
            env.episode_length = cfg.eval.recovery_duration;
            for &seed in seeds {
                let setup = hover_recovery_setup(&env, cfg, cfg.params(), seed)?;
                keep(None, seed, run_episode(&env, setup, controller, eps, tau)?);
            }
        }
        Scenario::SlackTautDrop => {
            env.episode_length = cfg.eval.recovery_duration;
            env.model = CableModel::Compliant;
            for &seed in seeds {
                let setup = drop_setup(&env, cfg, cfg.params(), seed)?;
                keep(None, seed, run_episode(&env, setup, controller, eps, tau)?);
            }
        }
        Scenario::GridSweep => {
            let g = &cfg.eval;
            let cells = grid_cells(
                &linspace(g.grid_m_p[0], g.grid_m_p[1], g.grid_m_p[2] as usize),
                &linspace(g.grid_l[0], g.grid_l[1], g.grid_l[2] as usize),
            );
            rows = run_grid(cfg, controller, &cells, seeds)?;
        }
        Scenario::HistoryAblation => {
            let capacity = env.observation.history;
            for &h in &cfg.eval.ablation_history {
                // entries beyond the trained buffer length do not exist
                env.observation.visible_history = Some(h.min(capacity));
                for &seed in seeds {
                    let setup = tracking_setup(&env, cfg, cfg.params(), seed)?;
                    keep(Some(h), seed, run_episode(&env, setup, controller, eps, tau)?);
                }
            }
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{}_metrics.csv", scenario.as_str())))?);
        write_metrics_csv(&mut f, &rows)?;
        f.flush()?;
        for (history, seed, run) in &runs {
            let stem = match history {
                Some(h) => format!("{}_h{h}_seed{seed}", scenario.as_str()),
                None => format!("{}_seed{seed}", scenario.as_str()),
            };
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}_traj.csv")))?);
            write_trajectory_csv(&mut f, &run.log)?;
            f.flush()?;
            if scenario == Scenario::SlackTautDrop {
                let mut f = std::fs::File::create(dir.join(format!("{stem}_events.csv")))?;
                write_events_csv(&mut f, &run.events)?;
            }
        }
    }
    Ok(ScenarioReport {
        scenario,
        rows,
        runs: runs.into_iter().map(|(_, _, r)| r).collect(),
    })
}

pub const REFERENCE_HEADER: &str = "t,x_P,y_P,z_P,vx_P,vy_P,vz_P,ax_P,ay_P,az_P,x_Q,y_Q,z_Q,vx_Q,vy_Q,vz_Q,qx,qy,qz";

/// Samples a reference from the configured family and tabulates it at
/// `dt`.
pub fn reference_table(cfg: &Config, seed: u64, dt: f64) -> Result<String> {
    let mut rng = RngStream::derive(seed, 2);
    let t_f = cfg.sim.episode_length;
    let spec = sample_reference_with(&mut rng, t_f, &cfg.reference.ranges())?;
    let l = cfg.vehicle.cable_length;
    let mut s = String::new();
    writeln!(s, "{REFERENCE_HEADER}").unwrap();
    let n = (t_f / dt).round() as usize;
    for i in 0..=n {
        let t = i as f64 * dt;
        let r = quadrotor_reference(t, &spec, l)?;
        let mut fields = vec![t.to_string()];
        for v in [&r.x_p, &r.v_p, &r.a_p, &r.x_q, &r.v_q, &r.q] {
            fields.extend(v.iter().map(|x| x.to_string()));
        }
        writeln!(s, "{}", fields.join(",")).unwrap();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.as_str().parse::<Scenario>().unwrap(), s);
        }
        assert!(matches!("hover".parse::<Scenario>(), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn grid_has_every_cell() {
        let cells = grid_cells(&linspace(0.0, 0.2, 5), &linspace(0.0, 1.0, 5));
        assert_eq!(cells.len(), 25);
        assert_eq!(cells[0], (0.0, 0.0));
        assert_eq!(cells[24], (0.2, 1.0));
    }

    #[test]
    fn track_no_payload_uses_the_bare_endpoint() {
        let mut cfg = Config::default();
        cfg.sim.episode_length = 17.0;
        let rep = run_scenario(
            Scenario::TrackNoPayload,
            &cfg,
            &Controller::Baseline(GeometricGains::default()),
            &[0],
            None,
        )
        .unwrap();
        assert_eq!(rep.rows[0].m_p, 0.0);
        assert_eq!(rep.rows[0].l, 0.0);
        assert!(rep.rows[0].metrics.rmse_total.is_finite());
    }

    #[test]
    fn drop_starts_slack() {
        let cfg = Config::default();
        let env = eval_env(&cfg).unwrap();
        let s = drop_setup(&env, &cfg, cfg.params(), 3).unwrap();
        assert_eq!(s.state.mode, CableMode::Slack);
    }
}
