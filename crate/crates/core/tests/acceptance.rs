//! Acceptance gate. Runs every criterion, prints one pass/fail line each
//! (with its wall-clock time against the budget) and exits non-zero if any
//! criterion fails. Extra command-line words filter criteria by name.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cablequad::dynamics::{
    ideal_tension, impact_map, integrate_step, step_detailed, CableMode, CableModel, ExternalLoad, PayloadState,
    QuadrotorState, SystemParams, SystemState,
};
use cablequad::env::QuadPayloadEnv;
use cablequad::evaluation::{natural_period, run_scenario, Config, Controller, GeometricGains, Scenario};
use cablequad::learning::policy::gaussian_log_prob;
use cablequad::learning::{train, BanditEnv, ForwardCache, Network, NetworkSpec, PpoConfig, TrainConfig};
use cablequad::math::{e3, so3_exp, vee, Rot3, RngStream, Vec3};
use cablequad::reference::{payload_reference, quadrotor_reference, sample_reference, DEFAULT_HORIZON};
use cablequad::sensing::ObservationLayout;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria = [
        Criterion { id: 1, name: "hover_fixed_point", budget: Duration::from_secs(1), run: hover_fixed_point },
        Criterion { id: 2, name: "slack_free_fall", budget: Duration::from_secs(1), run: slack_free_fall },
        Criterion { id: 3, name: "stiff_limit", budget: Duration::from_secs(5), run: stiff_limit },
        Criterion { id: 4, name: "guard_and_impact", budget: Duration::from_secs(10), run: guard_and_impact },
        Criterion { id: 5, name: "flatness", budget: Duration::from_secs(10), run: flatness },
        Criterion { id: 6, name: "metric_definitions", budget: Duration::from_secs(1), run: metric_definitions },
        Criterion { id: 7, name: "gradient_check", budget: Duration::from_secs(30), run: gradient_check },
        Criterion { id: 8, name: "ppo_bandit", budget: Duration::from_secs(60), run: ppo_bandit },
        Criterion { id: 9, name: "hover_training", budget: Duration::from_secs(30 * 60), run: hover_training },
        Criterion { id: 10, name: "baseline_oracle", budget: Duration::from_secs(120), run: baseline_oracle },
        Criterion { id: 11, name: "slack_taut_drop", budget: Duration::from_secs(5), run: slack_taut_drop },
        Criterion { id: 12, name: "cli_reproducible", budget: Duration::from_secs(5 * 60), run: cli_reproducible },
    ];
    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria {
        if !filters.is_empty() && !filters.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {:.0} s budget", c.budget.as_secs_f64())),
            Err(e) => (false, e),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "acceptance {:>2} {:<20} {} [{:.2} s] {}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {} passed, {} failed", ran - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn level_quad(x: Vec3) -> QuadrotorState {
    QuadrotorState {
        x,
        v: Vec3::zeros(),
        rot: Rot3::identity(),
        omega: Vec3::zeros(),
    }
}

fn equal_rotors(total: f64) -> [f64; 4] {
    [total / 4.0; 4]
}

fn rotation_angle(r: &Rot3) -> f64 {
    let m = r.matrix();
    vee(&((m - m.transpose()) * 0.5)).norm()
}

fn hover_fixed_point() -> Check {
    let p = SystemParams::nominal();
    let x0 = Vec3::new(0.3, -0.2, 2.0);
    let mut s = SystemState::hanging(x0, &p, CableModel::Ideal);
    let start = s;
    let thrust = equal_rotors((p.m_q + p.m_p) * p.g);
    let (mut pos, mut ang) = (0.0f64, 0.0f64);
    for _ in 0..5000 {
        s = ok(integrate_step(&s, &thrust, &ExternalLoad::default(), &p, CableModel::Ideal, 0.002))?;
        ensure!(s.mode == CableMode::Taut, "cable went slack at hover");
        pos = pos
            .max((s.quad.x - start.quad.x).norm())
            .max((s.payload.x - start.payload.x).norm());
        ang = ang.max(rotation_angle(&s.quad.rot)).max((s.q - start.q).norm());
    }
    ensure!(pos < 1e-6 && ang < 1e-6, "drift {pos:.3e} m, {ang:.3e} rad");
    Ok(format!("max drift {pos:.1e} m, {ang:.1e} rad over 10 s"))
}

fn slack_free_fall() -> Check {
    let p = SystemParams::nominal();
    let quad = level_quad(Vec3::new(0.0, 0.0, 3.0));
    let mut s = SystemState::with_payload_at(quad, Vec3::new(0.0, 0.0, 2.7), &p);
    ensure!(s.mode == CableMode::Slack, "start is not slack");
    let x0 = s.payload.x;
    let v0 = Vec3::new(0.3, -0.2, 2.45);
    s.payload.v = v0;
    let thrust = equal_rotors(p.m_q * p.g);
    let dt = 0.002;
    let mut worst = 0.0f64;
    for k in 1..=250 {
        s = ok(integrate_step(&s, &thrust, &ExternalLoad::default(), &p, CableModel::Ideal, dt))?;
        ensure!(s.mode == CableMode::Slack, "cable became taut at step {k}");
        let t = k as f64 * dt;
        let exact = x0 + v0 * t - 0.5 * p.g * t * t * e3();
        worst = worst.max((s.payload.x - exact).norm());
    }
    ensure!(worst < 1e-6, "parabola error {worst:.3e} m");
    Ok(format!("max parabola error {worst:.1e} m over 0.5 s"))
}

fn stiff_limit() -> Check {
    let ideal_p = SystemParams::nominal();
    let stiff_p = SystemParams {
        cable_stiffness: 1e5,
        ..SystemParams::nominal()
    };
    let l = ideal_p.cable_length;
    let theta = 20f64.to_radians();
    let q = Vec3::new(theta.sin(), 0.0, -theta.cos());
    let quad = level_quad(Vec3::new(0.0, 0.0, 3.0));
    let ideal = SystemState {
        quad,
        payload: PayloadState {
            x: quad.x + l * q,
            v: Vec3::zeros(),
        },
        mode: CableMode::Taut,
        q,
        omega_cable: Vec3::zeros(),
    };
    let f = (ideal_p.m_q + ideal_p.m_p) * ideal_p.g;
    let thrust = equal_rotors(f);
    // start the compliant cable at the stretch matching the initial tension
    let tension = ideal_tension(&ideal, &(f * e3()), &Vec3::zeros(), &ideal_p);
    let mut stiff = ideal;
    stiff.payload.x = quad.x + (l + tension / stiff_p.cable_stiffness) * q;

    let mut a = ideal;
    let mut b = stiff;
    let load = ExternalLoad::default();
    let mut worst = 0.0f64;
    for k in 0..2500 {
        let (na, ea) = ok(step_detailed(&a, &thrust, &load, &ideal_p, CableModel::Ideal, 0.002))?;
        let (nb, eb) = ok(step_detailed(&b, &thrust, &load, &stiff_p, CableModel::Compliant, 0.002))?;
        ensure!(
            ea.impact.is_none() && !ea.released && eb.impact.is_none() && !eb.released,
            "mode switch at step {k}"
        );
        ensure!(nb.cable_distance() > l, "compliant cable went slack at step {k}");
        a = na;
        b = nb;
        worst = worst.max((a.payload.x - b.payload.x).norm());
    }
    ensure!(worst < 0.01, "payload trajectories differ by {worst:.4} m");
    Ok(format!("max payload difference {:.2} mm over 5 s", worst * 1e3))
}

fn guard_and_impact() -> Check {
    let p = SystemParams::nominal();
    let l = p.cable_length;
    let dt = 0.002;
    let thrust = equal_rotors(p.m_q * p.g);
    let mut rng = RngStream::new(4);
    let mut worst_overshoot = 0.0f64;
    for drop in 0..20 {
        let quad = level_quad(Vec3::new(0.0, 0.0, 3.0));
        let x_p = quad.x + Vec3::new(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), -rng.uniform(0.1, 0.6));
        let mut s = SystemState::with_payload_at(quad, x_p, &p);
        let mut fired = false;
        for k in 0..1000 {
            let rel_v = (s.payload.v - s.quad.v).norm();
            let (next, ev) = ok(step_detailed(&s, &thrust, &ExternalLoad::default(), &p, CableModel::Ideal, dt))?;
            if let Some(info) = ev.impact {
                // first step whose unconstrained end point reaches the cable length
                ensure!(info.distance >= l, "drop {drop}: impact before contact ({})", info.distance);
                let bound = (rel_v + p.g * dt) * dt + 1e-12;
                worst_overshoot = worst_overshoot.max((info.distance - l) / bound);
                ensure!(info.distance - l <= bound, "drop {drop}: guard fired late at step {k}");
                ensure!(info.ke_after <= info.ke_before, "drop {drop}: impact gained energy");
                fired = true;
                break;
            }
            ensure!(next.cable_distance() < l, "drop {drop}: missed crossing at step {k}");
            s = next;
        }
        ensure!(fired, "drop {drop}: no impact in 2 s");
    }

    let mut worst_gain = f64::NEG_INFINITY;
    for i in 0..1000 {
        let params = SystemParams::nominal().with_payload(rng.uniform(0.05, 0.5), rng.uniform(0.3, 2.0));
        let u = rng.unit_vector();
        let quad = QuadrotorState {
            x: rng.uniform_box(2.0),
            v: rng.uniform_box(3.0),
            rot: so3_exp(&rng.uniform_box(1.0)),
            omega: rng.uniform_box(2.0),
        };
        let pre = SystemState {
            quad,
            payload: PayloadState {
                x: quad.x + u * params.cable_length * rng.uniform(1.0, 1.01),
                v: rng.uniform_box(5.0),
            },
            mode: CableMode::Slack,
            q: u,
            omega_cable: Vec3::zeros(),
        };
        let post = impact_map(&pre, &params);
        let (k0, k1) = (pre.kinetic_energy(&params), post.kinetic_energy(&params));
        worst_gain = worst_gain.max(k1 - k0);
        ensure!(k1 <= k0 * (1.0 + 1e-12), "state {i}: kinetic energy rose from {k0} to {k1}");
        let radial = post.q.dot(&(post.payload.v - post.quad.v));
        ensure!(radial.abs() < 1e-9, "state {i}: radial velocity {radial} survives the impact");
    }
    Ok(format!(
        "20 drops, overshoot <= {:.2} of one step; 1000 impacts, max KE change {worst_gain:.2e} J",
        worst_overshoot
    ))
}

fn flatness() -> Check {
    let (m_q, m_p, l) = (0.835, 0.2, 1.0);
    let h = 1e-4;
    let mut worst_res = 0.0f64;
    let mut worst_fd = 0.0f64;
    for i in 0..100 {
        let mut rng = RngStream::derive(5, i);
        let spec = ok(sample_reference(&mut rng, DEFAULT_HORIZON))?;
        let g = spec.g;
        let (lo, hi) = (spec.t_s + spec.delta, spec.t_e - spec.delta);
        for k in 0..=200 {
            let t = lo + (hi - lo) * k as f64 / 200.0;
            let r = ok(quadrotor_reference(t, &spec, l))?;
            let n = r.a_p + g * e3();
            let tension = -m_p * n.dot(&r.q);
            let thrust = m_q * (r.a_q + g * e3()) - tension * r.q;
            let lhs = (m_q + m_p) * n;
            let rhs = (r.q.dot(&thrust) - m_q * l * r.q_dot.norm_squared()) * r.q;
            worst_res = worst_res.max((lhs - rhs).norm() / lhs.norm());
        }
        let breaks = [spec.t_s, spec.t_s + spec.delta, spec.t_e - spec.delta, spec.t_e];
        for k in 0..=500 {
            let t = spec.t_f * k as f64 / 500.0;
            if breaks.iter().any(|b| (t - b).abs() < 2.0 * h) || t < h || t > spec.t_f - h {
                continue;
            }
            let (m, c, pl) = (payload_reference(t - h, &spec), payload_reference(t, &spec), payload_reference(t + h, &spec));
            let v_fd = (pl.x - m.x) / (2.0 * h);
            let a_fd = (pl.v - m.v) / (2.0 * h);
            worst_fd = worst_fd.max((v_fd - c.v).amax()).max((a_fd - c.a).amax());
        }
    }
    ensure!(worst_res < 1e-3, "taut equation residual {worst_res:.3e}");
    ensure!(worst_fd < 1e-6, "finite-difference mismatch {worst_fd:.3e}");
    Ok(format!("relative residual {worst_res:.1e}, derivative mismatch {worst_fd:.1e}"))
}

fn metric_definitions() -> Check {
    let t_n = natural_period(1.0, 9.81).ok_or("no natural period")?;
    ensure!((t_n - 2.006).abs() < 5e-4, "T_n = {t_n}");
    ensure!(format!("{t_n:.1}") == "2.0", "T_n = {t_n} does not round to 2.0");
    let total = cablequad::evaluation::metrics::rmse_total(0.008, 0.010, 0.008);
    ensure!(format!("{total:.4}") == "0.0151", "total RMSE {total}");
    // largest total consistent with per-axis values that round to the inputs
    let upper = cablequad::evaluation::metrics::rmse_total(0.0085, 0.0105, 0.0085);
    ensure!(
        total < 0.0165 && upper >= 0.0155,
        "0.016 is not reachable under rounding (range {total:.4}..{upper:.4})"
    );
    Ok(format!("T_n = {t_n:.4} s, total RMSE {total:.4} (up to {upper:.4} under rounding)"))
}

/// Loss on one batch: negative Gaussian log-likelihood of fixed raw actions
/// plus squared value error. Returns the loss and its analytic gradient.
fn probe_loss(net: &Network, params: &[f64], obs: &[f64], u: &[f64], y: &[f64], grad: Option<&mut Vec<f64>>) -> f64 {
    let batch = y.len();
    let a = net.spec.act_dim;
    let mut cache = ForwardCache::default();
    net.forward(params, obs, batch, &mut cache).unwrap();
    let log_std = &params[net.log_std..];
    let mut loss = 0.0;
    for b in 0..batch {
        loss -= gaussian_log_prob(&u[b * a..(b + 1) * a], &cache.mean[b * a..(b + 1) * a], log_std);
        loss += 0.5 * (cache.value[b] - y[b]).powi(2);
    }
    if let Some(grad) = grad {
        let mut d_mean = vec![0.0; batch * a];
        let mut d_log_std = vec![0.0; a];
        for b in 0..batch {
            for j in 0..a {
                let var = (2.0 * log_std[j]).exp();
                let diff = u[b * a + j] - cache.mean[b * a + j];
                d_mean[b * a + j] = -diff / var;
                d_log_std[j] += 1.0 - diff * diff / var;
            }
        }
        let d_value: Vec<f64> = (0..batch).map(|b| cache.value[b] - y[b]).collect();
        grad.clear();
        grad.resize(params.len(), 0.0);
        net.backward(params, &cache, &d_mean, &d_value, &d_log_std, grad);
    }
    loss
}

/// Compares analytic and central-difference gradients on `indices`.
/// Returns the worst relative error over gradients above the absolute
/// floor, the number of mismatches, the number checked and the number
/// judged on the absolute floor alone.
fn compare_gradients(net: &Network, rng: &mut RngStream, indices: Option<&[usize]>) -> (f64, usize, usize, usize) {
    let batch = 3;
    let mut params = net.init_params(rng, -0.5);
    for p in params.iter_mut() {
        *p += 0.1 * rng.normal();
    }
    let obs: Vec<f64> = (0..batch * net.spec.obs_len()).map(|_| rng.normal()).collect();
    let u: Vec<f64> = (0..batch * net.spec.act_dim).map(|_| rng.normal()).collect();
    let y: Vec<f64> = (0..batch).map(|_| rng.normal()).collect();
    let mut grad = Vec::new();
    probe_loss(net, &params, &obs, &u, &y, Some(&mut grad));
    let all: Vec<usize>;
    let idx = match indices {
        Some(i) => i,
        None => {
            all = (0..params.len()).collect();
            &all
        }
    };
    let h = 1e-5;
    let (mut worst, mut bad, mut floored) = (0.0f64, 0, 0);
    for &i in idx {
        let orig = params[i];
        params[i] = orig + h;
        let up = probe_loss(net, &params, &obs, &u, &y, None);
        params[i] = orig - h;
        let down = probe_loss(net, &params, &obs, &u, &y, None);
        params[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let err = (grad[i] - numeric).abs();
        let scale = grad[i].abs().max(numeric.abs());
        // an absolute error below 1e-8 is at the central difference's own
        // round-off level (eps * |loss| / h)
        if err > 1e-4 * scale {
            if err > 1e-8 {
                bad += 1;
            } else {
                floored += 1;
            }
        }
        if err > 1e-8 {
            worst = worst.max(err / scale);
        }
    }
    (worst, bad, idx.len(), floored)
}

fn gradient_check() -> Check {
    // every parameter of a narrow network with all layer kinds
    let reduced = Network::new(NetworkSpec {
        present: ObservationLayout::PRESENT,
        hist_in: 20,
        prev_in: 12,
        enc_hist: 8,
        enc_prev: 6,
        hidden: vec![12, 10],
        act_dim: 4,
    });
    let mut rng = RngStream::new(7);
    let (mut worst, mut bad, mut checked, mut floored) = (0.0f64, 0, 0, 0);
    for _ in 0..10 {
        let (w, b, n, f) = compare_gradients(&reduced, &mut rng, None);
        worst = worst.max(w);
        bad += b;
        checked += n;
        floored += f;
    }
    ensure!(bad == 0, "{bad} of {checked} reduced-network gradients off (worst {worst:.2e})");

    // a spread of parameters of the full-size network, covering every layer
    let full = Network::new(NetworkSpec::for_layout(&Config::default().env_config().unwrap().observation.layout()));
    let mut full_checked = 0;
    let mut full_worst = 0.0f64;
    for _ in 0..10 {
        let mut idx: Vec<usize> = Vec::new();
        for e in full.manifest() {
            for _ in 0..4 {
                idx.push(e.offset + rng.index(e.rows * e.cols));
            }
        }
        let (w, b, n, f) = compare_gradients(&full, &mut rng, Some(&idx));
        ensure!(b == 0, "{b} of {n} full-network gradients off (worst {w:.2e})");
        full_worst = full_worst.max(w);
        full_checked += n;
        floored += f;
    }
    Ok(format!(
        "{checked} reduced-network and {full_checked} full-network gradients, worst relative error {:.1e}, \
         {floored} tiny gradients within 1e-8 absolute",
        worst.max(full_worst)
    ))
}

fn ppo_bandit() -> Check {
    let mut probs = Vec::new();
    for seed in [1, 2, 3] {
        let env = BanditEnv::new(4);
        let spec = env.spec(1);
        let cfg = TrainConfig {
            ppo: PpoConfig {
                steps_per_env: 64,
                num_envs: 1,
                lr: 3e-3,
                ..PpoConfig::default()
            },
            iterations: 200,
            checkpoint_every: 0,
            seed,
            parallel: false,
        };
        let out = ok(train(vec![env], spec, &cfg, None, |_| {}))?;
        probs.push(ok(BanditEnv::prob_arm_a(&out.final_params, 4))?);
    }
    ensure!(probs.iter().all(|&p| p >= 0.9), "P(better arm) = {probs:.3?}");
    Ok(format!("P(better arm) = {probs:.3?} after 200 iterations"))
}

/// Longest stretch (s) during which the position error stays below `band`.
fn longest_hold(errors: &[f64], dt: f64, band: f64) -> f64 {
    let (mut best, mut run) = (0usize, 0usize);
    for &e in errors {
        run = if e < band { run + 1 } else { 0 };
        best = best.max(run);
    }
    best.saturating_sub(1) as f64 * dt
}

fn hover_training() -> Check {
    let mut cfg = Config::hover_training();
    cfg.eval.recovery_duration = cfg.sim.episode_length;
    let env_cfg = ok(cfg.env_config())?;
    let dt = env_cfg.policy_dt();
    let mut lines = Vec::new();
    let mut passed = 0;
    for seed in [1u64, 2, 3] {
        let envs = (0..cfg.ppo.num_envs)
            .map(|_| QuadPayloadEnv::new(env_cfg.clone()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let out = ok(train(envs, ok(cfg.network_spec())?, &cfg.train_config(seed), None, |_| {}))?;
        let first = out.log[0].mean_return;
        let best = out.log.iter().map(|l| l.mean_return).fold(f64::NEG_INFINITY, f64::max);
        let gain = (best - first) / first.abs();
        let ctrl = Controller::Policy(Box::new(out.best_params));
        let report = ok(run_scenario(Scenario::HoverRecovery, &cfg, &ctrl, &[seed], None))?;
        let hold = longest_hold(&report.runs[0].error_norms(), dt, 0.1);
        let ok_seed = gain >= 0.5 && hold >= 3.0;
        passed += ok_seed as usize;
        lines.push(format!(
            "seed {seed}: return {first:.0} -> {best:.0} ({:+.0}%), hold {hold:.2} s {}",
            gain * 100.0,
            if ok_seed { "ok" } else { "short" }
        ));
    }
    let detail = lines.join("; ");
    ensure!(passed >= 2, "{passed}/3 seeds: {detail}");
    Ok(format!("{passed}/3 seeds; {detail}"))
}

fn baseline_oracle() -> Check {
    let mut cfg = Config::default();
    cfg.reference.amplitude = [0.5; 3];
    cfg.reference.freq = [0.1; 3];
    let ctrl = Controller::Baseline(GeometricGains::default());
    let seeds: Vec<u64> = (0..20).collect();
    let track = ok(run_scenario(Scenario::TrackNoPayload, &cfg, &ctrl, &seeds, None))?;
    let worst_rmse = track.rows.iter().map(|r| r.metrics.rmse_total).fold(0.0, f64::max);
    ensure!(
        track.rows.iter().all(|r| r.termination.is_none()),
        "a tracking run terminated early"
    );
    ensure!(worst_rmse <= 0.05, "tracking rmse_total {worst_rmse:.4} m");

    cfg.vehicle.m_p = 0.0;
    cfg.vehicle.cable_length = 0.0;
    let seeds: Vec<u64> = (0..100).collect();
    let hover = ok(run_scenario(Scenario::HoverRecovery, &cfg, &ctrl, &seeds, None))?;
    let unsettled: Vec<u64> = hover.rows.iter().filter(|r| r.metrics.t_s.is_none()).map(|r| r.seed).collect();
    ensure!(unsettled.is_empty(), "no finite T_s for seeds {unsettled:?}");
    let worst_ts = hover.rows.iter().filter_map(|r| r.metrics.t_s).fold(0.0, f64::max);
    Ok(format!(
        "20 tracking runs, worst rmse {worst_rmse:.4} m; 100 recoveries, worst T_s {worst_ts:.2} s"
    ))
}

fn slack_taut_drop() -> Check {
    let cfg = Config::default();
    let ctrl = Controller::Baseline(cfg.gains());
    let report = ok(run_scenario(Scenario::SlackTautDrop, &cfg, &ctrl, &[0], None))?;
    let run = &report.runs[0];
    let events = &run.events;
    ensure!(!events.is_empty(), "no mode events");
    let first = &events[0];
    ensure!(
        first.from == CableMode::Slack && first.to == CableMode::Taut,
        "first event is {:?} -> {:?}",
        first.from,
        first.to
    );
    // free fall: before the first catch the payload velocity is exactly -g t
    let g = run.params.g;
    let v0 = run.log[0].state.payload.v;
    let mut fall_err = 0.0f64;
    for row in run.log.iter().filter(|r| r.t < first.t) {
        let expect = v0 - g * (row.t - run.log[0].t) * e3();
        fall_err = fall_err.max((row.state.payload.v - expect).norm());
    }
    ensure!(fall_err < 1e-6, "payload not in free fall before the catch ({fall_err:.2e})");
    let bounces = events
        .iter()
        .skip(1)
        .filter(|e| e.from == CableMode::Taut && e.to == CableMode::Slack)
        .count();
    ensure!(bounces >= 1, "no re-slack after the first catch");
    ensure!(run.termination.is_none(), "run terminated: {:?}", run.termination);
    let t_s = run.metrics.t_s.ok_or("the payload never settles")?;
    let last = events.last().unwrap();
    ensure!(last.to == CableMode::Taut, "ends slack");
    Ok(format!(
        "free fall until {:.2} s, {bounces} re-slack phase(s), last catch {:.2} s, settled at {t_s:.2} s",
        first.t, last.t
    ))
}

const CLI_CONFIG: &str = r#"
[network]
enc_hist = 8
enc_prev = 8
hidden = [16, 16]

[ppo]
steps_per_env = 64
num_envs = 2
epochs = 2

[train]
iterations = 2
checkpoint_every = 1

[eval]
recovery_duration = 5.0
grid_m_p = [0.0, 0.2, 2.0]
grid_l = [0.5, 1.0, 2.0]
ablation_history = [0, 5]
"#;

fn cablequad(args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cablequad"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("`cablequad {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

/// All files under `dir` with their contents, sorted by relative path.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn cli_reproducible() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("small.toml");
    std::fs::write(&config, CLI_CONFIG).map_err(|e| e.to_string())?;
    let config = config.to_str().unwrap();

    let mut compared = 0;
    let mut runs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for pass in 0..2 {
        let root = tmp.path().join(format!("run{pass}"));
        let d = |name: &str| root.join(name).to_string_lossy().into_owned();
        cablequad(&["train", "--config", config, "--out", &d("train"), "--seed", "3"])?;
        // both passes evaluate the policy trained in the first one
        let policy = tmp.path().join("run0/train/best.bin").to_string_lossy().into_owned();
        cablequad(&["simulate", "--config", config, "--out", &d("simulate"), "--seed", "3"])?;
        cablequad(&["simulate", "--config", config, "--policy", &policy, "--out", &d("simulate_policy"), "--seed", "3"])?;
        for s in Scenario::ALL {
            let name = format!("eval_{}", s.as_str());
            cablequad(&["eval", "--scenario", s.as_str(), "--config", config, "--policy", &policy, "--out", &d(&name), "--seed", "3"])?;
        }
        cablequad(&["eval", "--scenario", "slack_taut_drop", "--config", config, "--out", &d("eval_drop_baseline"), "--seed", "3", "--seeds", "2"])?;
        cablequad(&["sweep", "--grid", "0:0.2:2,0.5:1:2", "--config", config, "--seeds", "1", "--out", &d("sweep"), "--seed", "3"])?;
        cablequad(&["gen-ref", "--config", config, "--seed", "3", "--out", &d("ref.csv")])?;
        runs.push(snapshot(&root));
    }
    let (a, b) = (&runs[0], &runs[1]);
    ensure!(a.len() == b.len(), "runs wrote {} and {} files", a.len(), b.len());
    for ((na, ca), (nb, cb)) in a.iter().zip(b) {
        ensure!(na == nb, "file sets differ at {na} / {nb}");
        ensure!(ca == cb, "{na} differs between runs");
        compared += 1;
    }
    Ok(format!("{compared} files byte-identical across two runs of every subcommand"))
}
