//! Command-line entry point.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::Config;
use super::scenarios::{
    grid_cells, linspace, reference_table, run_episode, run_grid, run_scenario, write_events_csv, write_metrics_csv,
    Controller, MetricsRow, RunSetup, Scenario,
};
use crate::env::{write_trajectory_csv, QuadPayloadEnv};
use crate::error::{Error, Result};
use crate::learning::{checkpoint, train};

#[derive(Debug, Parser)]
#[command(name = "cablequad", about = "Quadrotor with a cable-suspended payload: simulation, training and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one randomized episode and write its trajectory.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Policy checkpoint; the geometric baseline is used when absent.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a policy with PPO.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an evaluation scenario.
    Eval {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Number of consecutive seeds starting at `--seed`.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Tracking metrics over an (m_P, l) grid.
    Sweep {
        /// `mPmin:mPmax:n,lmin:lmax:n`
        #[arg(long)]
        grid: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample a reference trajectory and write it at 100 Hz.
    GenRef {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `lo:hi:n,lo:hi:n`.
pub fn parse_grid(spec: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = || Error::Config(format!("grid `{spec}` is not of the form mPmin:mPmax:n,lmin:lmax:n"));
    let axis = |s: &str| -> Result<Vec<f64>> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n == 0 || !(lo <= hi) || lo < 0.0 {
            return Err(bad());
        }
        Ok(linspace(lo, hi, n))
    };
    let (a, b) = spec.split_once(',').ok_or_else(bad)?;
    Ok((axis(a)?, axis(b)?))
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn controller(cfg: &Config, policy: Option<&Path>) -> Result<Controller> {
    match policy {
        Some(p) => Ok(Controller::Policy(Box::new(
            checkpoint::load(p).map_err(|e| Error::Config(format!("cannot load policy {}: {e}", p.display())))?,
        ))),
        None => Ok(Controller::Baseline(cfg.gains())),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn seeds(first: u64, count: u64) -> Vec<u64> {
    (first..first + count).collect()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, policy, out, seed } => {
            let cfg = load_config(config.as_deref())?;
            let ctrl = controller(&cfg, policy.as_deref())?;
            let env_cfg = cfg.env_config()?;
            let (params, spec, state, disturbance) = QuadPayloadEnv::new(env_cfg.clone())?.draw_episode(seed)?;
            let setup = RunSetup {
                params,
                spec,
                state,
                disturbance,
                seed,
            };
            let run = run_episode(&env_cfg, setup, &ctrl, cfg.eval.settle_eps, cfg.eval.settle_tau)?;
            std::fs::create_dir_all(&out)?;
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &run.log)?;
            write_file(&out.join("trajectory.csv"), &buf)?;
            buf.clear();
            write_events_csv(&mut buf, &run.events)?;
            write_file(&out.join("events.csv"), &buf)?;
            buf.clear();
            let row = MetricsRow {
                scenario: "simulate",
                controller: ctrl.name(),
                seed,
                m_p: run.params.m_p,
                l: run.params.cable_length,
                history: None,
                metrics: run.metrics,
                termination: run.termination,
                mode_events: run.events.len(),
            };
            write_metrics_csv(&mut buf, &[row])?;
            write_file(&out.join("metrics.csv"), &buf)
        }
        Command::Train { config, out, seed } => {
            let cfg = load_config(config.as_deref())?;
            let env_cfg = cfg.env_config()?;
            let tc = cfg.train_config(seed);
            let envs = (0..tc.ppo.num_envs)
                .map(|_| QuadPayloadEnv::new(env_cfg.clone()))
                .collect::<Result<Vec<_>>>()?;
            let spec = cfg.network_spec()?;
            let outcome = train(envs, spec, &tc, Some(&out), |l| {
                eprintln!(
                    "iter {:4}  return {:9.2}  ep_len {:6.1}  kl {:.4}",
                    l.iter, l.mean_return, l.mean_ep_len, l.stats.kl
                );
            })?;
            if let Some(best) = outcome.best_iter {
                eprintln!("best iteration {best}");
            }
            Ok(())
        }
        Command::Eval {
            scenario,
            config,
            policy,
            seeds: n,
            out,
            seed,
        } => {
            let scenario: Scenario = scenario.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
            let cfg = load_config(config.as_deref())?;
            let ctrl = controller(&cfg, policy.as_deref())?;
            run_scenario(scenario, &cfg, &ctrl, &seeds(seed, n), Some(&out))?;
            Ok(())
        }
        Command::Sweep {
            grid,
            config,
            policy,
            seeds: n,
            out,
            seed,
        } => {
            let (m_p, l) = parse_grid(&grid)?;
            let cfg = load_config(config.as_deref())?;
            let ctrl = controller(&cfg, policy.as_deref())?;
            let rows = run_grid(&cfg, &ctrl, &grid_cells(&m_p, &l), &seeds(seed, n))?;
            let mut buf = Vec::new();
            write_metrics_csv(&mut buf, &rows)?;
            write_file(&out.join("sweep_metrics.csv"), &buf)
        }
        Command::GenRef { config, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let table = reference_table(&cfg, seed, cfg.sim.dt * cfg.sim.substeps as f64)?;
            write_file(&out, table.as_bytes())
        }
    }
}

/// Exit status for an error: 2 for a numerical divergence, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } | Error::NonFinite(_) | Error::NonFiniteLoss(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec() {
        let (m, l) = parse_grid("0:0.2:5,0:1:3").unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(l, vec![0.0, 0.5, 1.0]);
        assert!(parse_grid("0:0.2,0:1:3").is_err());
        assert!(parse_grid("0:0.2:0,0:1:3").is_err());
        assert!(parse_grid("0.3:0.2:2,0:1:3").is_err());
    }

    #[test]
    fn unknown_flag_exits_with_one() {
        assert_eq!(cli_main(["cablequad", "gen-ref", "--bogus"]), 1);
        assert_eq!(cli_main(["cablequad"]), 1);
    }

    #[test]
    fn divergence_maps_to_two() {
        assert_eq!(exit_code(&Error::Divergence { t: 1.0, what: "state" }), 2);
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
    }
}
