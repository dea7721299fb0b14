//! Metrics, the geometric baseline, evaluation scenarios and the CLI.

pub mod baseline;
pub mod cli;
pub mod config;
pub mod metrics;
pub mod scenarios;

pub use baseline::{geometric_control, GeometricGains};
pub use config::Config;
pub use metrics::{natural_period, rmse_metrics, settling_metrics, Settling, TrackingMetrics};
pub use scenarios::{run_episode, run_scenario, Controller, RunResult, RunSetup, Scenario, ScenarioReport};
