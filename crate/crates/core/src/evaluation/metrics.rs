//! Tracking and settling metrics.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::Vec3;

pub const SETTLING_EPS: f64 = 0.01;
pub const SETTLING_TAU: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrackingMetrics {
    pub rmse_x: f64,
    pub rmse_y: f64,
    pub rmse_z: f64,
    /// Euclidean norm of the per-axis RMSEs.
    pub rmse_total: f64,
    /// Time average of the instantaneous error norm.
    pub mean_norm: f64,
    pub t_s: Option<f64>,
    pub t_s_over_t_n: Option<f64>,
    pub e_ss: f64,
}

/// Combines per-axis RMSEs into the reported total.
pub fn rmse_total(x: f64, y: f64, z: f64) -> f64 {
    (x * x + y * y + z * z).sqrt()
}

/// Per-axis RMSE of `actual - reference`, plus the total and the mean
/// error norm.
pub fn rmse_metrics(actual: &[Vec3], reference: &[Vec3]) -> Result<TrackingMetrics> {
    if actual.is_empty() {
        return Err(Error::EmptySeries);
    }
    if actual.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "{} samples against {} reference samples",
            actual.len(),
            reference.len()
        )));
    }
    let n = actual.len() as f64;
    let mut sq = Vec3::zeros();
    let mut norm_sum = 0.0;
    for (a, r) in actual.iter().zip(reference) {
        let e = a - r;
        sq += e.component_mul(&e);
        norm_sum += e.norm();
    }
    let (x, y, z) = ((sq.x / n).sqrt(), (sq.y / n).sqrt(), (sq.z / n).sqrt());
    Ok(TrackingMetrics {
        rmse_x: x,
        rmse_y: y,
        rmse_z: z,
        rmse_total: rmse_total(x, y, z),
        mean_norm: norm_sum / n,
        ..Default::default()
    })
}

/// Small-angle pendulum period `2 pi sqrt(l / g)`; `None` for `l = 0`.
pub fn natural_period(l: f64, g: f64) -> Option<f64> {
    (l > 0.0).then(|| 2.0 * PI * (l / g).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settling {
    pub t_s: Option<f64>,
    pub t_s_over_t_n: Option<f64>,
    pub e_ss: f64,
}

/// Settling time: the first sample time `t` after which the error stays
/// within `eps` for the whole window `[t, t + tau]`. `e` is sampled every
/// `dt` starting at zero. `e_ss` is the mean over the last `tau`.
pub fn settling_metrics(e: &[f64], dt: f64, l: f64, g: f64, eps: f64, tau: f64) -> Result<Settling> {
    if e.is_empty() {
        return Err(Error::EmptySeries);
    }
    let duration = (e.len() - 1) as f64 * dt;
    if duration + 1e-9 < tau {
        return Err(Error::SeriesTooShort { duration, tau });
    }
    let w = (tau / dt - 1e-9).ceil() as usize;
    // runs[i]: consecutive in-band samples starting at sample i
    let mut run = 0usize;
    let mut runs = vec![0usize; e.len()];
    for i in (0..e.len()).rev() {
        run = if e[i].abs() <= eps { run + 1 } else { 0 };
        runs[i] = run;
    }
    let t_s = (0..e.len())
        .take_while(|&i| i + w < e.len())
        .find(|&i| runs[i] > w)
        .map(|i| i as f64 * dt);
    let tail = w.min(e.len() - 1) + 1;
    let e_ss = e[e.len() - tail..].iter().map(|x| x.abs()).sum::<f64>() / tail as f64;
    let t_n = natural_period(l, g);
    Ok(Settling {
        t_s,
        t_s_over_t_n: t_s.zip(t_n).map(|(s, n)| s / n),
        e_ss,
    })
}
