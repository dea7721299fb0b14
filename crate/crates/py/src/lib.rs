//! Python bindings: simulation environment, policy checkpoints, reference
//! generation, metrics, scenarios and training.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cablequad::env::{Environment, QuadPayloadEnv};
use cablequad::evaluation::scenarios::{reference_table, MetricsRow};
use cablequad::evaluation::{metrics, Controller, Scenario};
use cablequad::learning::{checkpoint, policy_act, ForwardCache, PolicyParams};
use cablequad::math::{RngStream, Vec3};
use cablequad::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Divergence { .. } | Error::NonFinite(_) | Error::NonFiniteLoss(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Full configuration (simulation, vehicle, training and evaluation).
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone, Default)]
pub struct PyConfig {
    inner: cablequad::evaluation::Config,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = cablequad::evaluation::Config::from_toml_str(text).map_err(py_err)?;
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = cablequad::evaluation::Config::load(&path).map_err(py_err)?;
        Ok(PyConfig { inner })
    }

    /// The quadrotor-only hover task used as a quick training check.
    #[staticmethod]
    fn hover_training() -> Self {
        PyConfig {
            inner: cablequad::evaluation::Config::hover_training(),
        }
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }
}

fn config_or_default(config: Option<PyConfig>) -> cablequad::evaluation::Config {
    config.map(|c| c.inner).unwrap_or_default()
}

/// Training environment. Observations and actions are plain lists.
#[pyclass(name = "Env")]
pub struct PyEnv {
    inner: QuadPayloadEnv,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (config=None))]
    fn new(config: Option<PyConfig>) -> PyResult<Self> {
        let cfg = config_or_default(config);
        let inner = QuadPayloadEnv::new(cfg.env_config().map_err(py_err)?).map_err(py_err)?;
        Ok(PyEnv { inner })
    }

    #[getter]
    fn obs_len(&self) -> usize {
        self.inner.obs_len()
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    fn reset(&mut self, seed: u64) -> PyResult<Vec<f64>> {
        self.inner.reset(seed).map(|o| o.to_vec()).map_err(py_err)
    }

    /// Applies a normalized action `[a_c, a_p, a_q, a_r]` and returns
    /// `(obs, reward, terminated, truncated)`.
    fn step(&mut self, action: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool, bool)> {
        let t = self.inner.step(&action).map_err(py_err)?;
        Ok((t.obs.to_vec(), t.reward, t.terminated, t.truncated))
    }

    /// Quadrotor and payload positions, `(x_q, x_p)`.
    fn positions(&self) -> ([f64; 3], [f64; 3]) {
        let s = self.inner.state();
        (s.quad.x.into(), s.payload.x.into())
    }

    /// Current cable mode: `taut`, `slack` or `none`.
    fn cable_mode(&self) -> &'static str {
        self.inner.state().mode.as_str()
    }
}

/// Trained policy loaded from a checkpoint.
#[pyclass(name = "Policy")]
pub struct PyPolicy {
    inner: PolicyParams,
    path: PathBuf,
}

#[pymethods]
impl PyPolicy {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = checkpoint::load(&path).map_err(py_err)?;
        Ok(PyPolicy { inner, path })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.values.len()
    }

    #[getter]
    fn obs_len(&self) -> usize {
        self.inner.net.spec.obs_len()
    }

    /// Action in `[-1, 1]^4` for one observation. Deterministic mode
    /// returns the squashed mean; otherwise the action is sampled with
    /// `seed`.
    #[pyo3(signature = (obs, deterministic=true, seed=0))]
    fn act(&self, obs: Vec<f64>, deterministic: bool, seed: u64) -> PyResult<Vec<f64>> {
        let mut rng = RngStream::new(seed);
        let mut cache = ForwardCache::default();
        policy_act(&self.inner, &obs, &mut rng, deterministic, &mut cache)
            .map(|a| a.action)
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Policy('{}', {} parameters)", self.path.display(), self.inner.values.len())
    }
}

/// One row of a metrics table.
#[pyclass(name = "Metrics", get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMetrics {
    scenario: String,
    controller: String,
    seed: u64,
    m_p: f64,
    l: f64,
    history: Option<usize>,
    rmse_x: f64,
    rmse_y: f64,
    rmse_z: f64,
    rmse_total: f64,
    mean_norm: f64,
    t_s: Option<f64>,
    t_s_over_t_n: Option<f64>,
    e_ss: f64,
    termination: Option<String>,
    mode_events: usize,
}

impl From<&MetricsRow> for PyMetrics {
    fn from(r: &MetricsRow) -> Self {
        PyMetrics {
            scenario: r.scenario.to_string(),
            controller: r.controller.to_string(),
            seed: r.seed,
            m_p: r.m_p,
            l: r.l,
            history: r.history,
            rmse_x: r.metrics.rmse_x,
            rmse_y: r.metrics.rmse_y,
            rmse_z: r.metrics.rmse_z,
            rmse_total: r.metrics.rmse_total,
            mean_norm: r.metrics.mean_norm,
            t_s: r.metrics.t_s,
            t_s_over_t_n: r.metrics.t_s_over_t_n,
            e_ss: r.metrics.e_ss,
            termination: r.termination.map(|t| t.as_str().to_string()),
            mode_events: r.mode_events,
        }
    }
}

#[pymethods]
impl PyMetrics {
    fn __repr__(&self) -> String {
        let t_s = self.t_s.map_or("None".to_string(), |t| format!("{t:.2}"));
        format!(
            "Metrics({} {} seed={} rmse_total={:.4} t_s={t_s})",
            self.scenario, self.controller, self.seed, self.rmse_total
        )
    }
}

/// Rotation matrix `exp(hat(w))` as three rows.
#[pyfunction]
fn so3_exp(w: [f64; 3]) -> [[f64; 3]; 3] {
    let r = cablequad::math::so3_exp(&Vec3::from(w));
    let m = r.matrix();
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

#[pyfunction]
#[pyo3(signature = (l, g=9.81))]
fn natural_period(l: f64, g: f64) -> Option<f64> {
    metrics::natural_period(l, g)
}

#[pyfunction]
fn rmse_total(x: f64, y: f64, z: f64) -> f64 {
    metrics::rmse_total(x, y, z)
}

/// `(t_s, t_s / t_n, e_ss)` for an error-norm series sampled every `dt`.
#[pyfunction]
#[pyo3(signature = (errors, dt, l, eps=metrics::SETTLING_EPS, tau=metrics::SETTLING_TAU, g=9.81))]
fn settling_metrics(
    errors: Vec<f64>,
    dt: f64,
    l: f64,
    eps: f64,
    tau: f64,
    g: f64,
) -> PyResult<(Option<f64>, Option<f64>, f64)> {
    let s = metrics::settling_metrics(&errors, dt, l, g, eps, tau).map_err(py_err)?;
    Ok((s.t_s, s.t_s_over_t_n, s.e_ss))
}

/// Reference trajectory for `seed` as CSV text, sampled every `dt`
/// (the control period when omitted).
#[pyfunction]
#[pyo3(signature = (seed, config=None, dt=None))]
fn gen_reference(seed: u64, config: Option<PyConfig>, dt: Option<f64>) -> PyResult<String> {
    let cfg = config_or_default(config);
    let dt = dt.unwrap_or(cfg.sim.dt * cfg.sim.substeps as f64);
    reference_table(&cfg, seed, dt).map_err(py_err)
}

/// Runs an evaluation scenario with the baseline controller, or with the
/// policy checkpoint at `policy`. CSV files are written when `out` is set.
#[pyfunction]
#[pyo3(signature = (scenario, seeds, config=None, policy=None, out=None))]
fn run_scenario(
    scenario: &str,
    seeds: Vec<u64>,
    config: Option<PyConfig>,
    policy: Option<PathBuf>,
    out: Option<PathBuf>,
) -> PyResult<Vec<PyMetrics>> {
    let scenario: Scenario = scenario.parse().map_err(py_err)?;
    let cfg = config_or_default(config);
    let ctrl = match policy {
        Some(p) => Controller::Policy(Box::new(checkpoint::load(&p).map_err(py_err)?)),
        None => Controller::Baseline(cfg.gains()),
    };
    let report = cablequad::evaluation::run_scenario(scenario, &cfg, &ctrl, &seeds, out.as_deref()).map_err(py_err)?;
    Ok(report.rows.iter().map(PyMetrics::from).collect())
}

/// Trains with PPO, writing checkpoints and the log to `out`. Returns the
/// per-iteration `(iter, mean_return, mean_episode_length)`.
#[pyfunction]
#[pyo3(signature = (out, seed=0, config=None))]
fn train(py: Python<'_>, out: PathBuf, seed: u64, config: Option<PyConfig>) -> PyResult<Vec<(usize, f64, f64)>> {
    let cfg = config_or_default(config);
    py.detach(|| {
        let env_cfg = cfg.env_config()?;
        let tc = cfg.train_config(seed);
        let envs = (0..tc.ppo.num_envs)
            .map(|_| QuadPayloadEnv::new(env_cfg.clone()))
            .collect::<cablequad::Result<Vec<_>>>()?;
        let outcome = cablequad::learning::train(envs, cfg.network_spec()?, &tc, Some(&out), |_| {})?;
        Ok(outcome.log.iter().map(|l| (l.iter, l.mean_return, l.mean_ep_len)).collect())
    })
    .map_err(py_err)
}

#[pymodule]
#[pyo3(name = "cablequad")]
pub fn cablequad_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PyMetrics>()?;
    m.add_function(wrap_pyfunction!(so3_exp, m)?)?;
    m.add_function(wrap_pyfunction!(natural_period, m)?)?;
    m.add_function(wrap_pyfunction!(rmse_total, m)?)?;
    m.add_function(wrap_pyfunction!(settling_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(gen_reference, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
