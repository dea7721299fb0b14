//! Windowed-sinusoid payload references and the quadrotor reference implied
//! by the cable tension direction.
//!
//! Each axis follows `x_i(t) = o_i + w(t) A_i (1 - cos(2 pi f_i t + phi_i))`
//! where `w` is a smoothstep window that ramps in over `[t_s, t_s + delta]`
//! and out over `[t_e - delta, t_e]`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::math::{e3, RngStream, Vec3};

/// Minimum `|a_P + g e3|` below which the cable direction is undefined.
pub const SINGULARITY_EPS: f64 = 0.1;
pub const DEFAULT_HORIZON: f64 = 25.0;
pub const DEFAULT_V_MAX: f64 = 4.0;
const GRAVITY: f64 = 9.81;

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSpec {
    pub amplitude: Vec3,
    /// Frequencies in Hz; negative values are allowed.
    pub freq: Vec3,
    pub phase: Vec3,
    pub t_s: f64,
    pub t_e: f64,
    pub delta: f64,
    pub t_f: f64,
    pub v_max: f64,
    /// Payload hover point the oscillation is added to.
    pub origin: Vec3,
    pub g: f64,
}

impl ReferenceSpec {
    /// Constant hover reference at `origin`.
    pub fn hover(origin: Vec3, t_f: f64) -> Self {
        ReferenceSpec {
            amplitude: Vec3::zeros(),
            freq: Vec3::zeros(),
            phase: Vec3::repeat(FRAC_PI_2),
            t_s: 5.0f64.min(t_f / 4.0),
            t_e: (t_f - 5.0).max(3.0 * t_f / 4.0),
            delta: 3.0f64.min(t_f / 8.0),
            t_f,
            v_max: DEFAULT_V_MAX,
            origin,
            g: GRAVITY,
        }
    }

    /// Largest nominal axis speed `max_i |A_i| |2 pi f_i|`.
    pub fn peak_speed(&self) -> f64 {
        (0..3)
            .map(|i| self.amplitude[i].abs() * (2.0 * PI * self.freq[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.delta > 0.0
            && self.t_s + self.delta <= self.t_e - self.delta + 1e-12
            && self.t_e <= self.t_f + 1e-12
            && self.amplitude.iter().chain(self.freq.iter()).all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "reference window t_s={} t_e={} delta={} t_f={}",
                self.t_s, self.t_e, self.delta, self.t_f
            )))
        }
    }
}

/// Sampling ranges for [`sample_reference_with`]: amplitudes uniform in
/// `[-amplitude_i, amplitude_i]`, frequencies in `[-freq_i, freq_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceRanges {
    pub amplitude: Vec3,
    pub freq: Vec3,
    pub t_s: f64,
    pub end_margin: f64,
    pub delta: f64,
    pub v_max: f64,
    pub origin: Vec3,
}

impl Default for ReferenceRanges {
    fn default() -> Self {
        ReferenceRanges {
            amplitude: Vec3::new(2.0, 2.0, 1.0),
            freq: Vec3::new(0.2, 0.2, 0.1),
            t_s: 5.0,
            end_margin: 5.0,
            delta: 3.0,
            v_max: DEFAULT_V_MAX,
            origin: Vec3::new(0.0, 0.0, 2.5),
        }
    }
}

/// Draws a reference from the default family.
pub fn sample_reference(rng: &mut RngStream, t_f: f64) -> Result<ReferenceSpec> {
    sample_reference_with(rng, t_f, &ReferenceRanges::default())
}

/// Draws amplitudes, frequencies and phases, rescales the amplitudes so the
/// nominal peak speed stays within `v_max`, and redraws if the reference
/// would pass near the free-fall singularity.
pub fn sample_reference_with(rng: &mut RngStream, t_f: f64, ranges: &ReferenceRanges) -> Result<ReferenceSpec> {
    if !(t_f >= ranges.t_s + ranges.end_margin + 2.0 * ranges.delta) {
        return Err(Error::InvalidParams(format!("reference horizon {t_f} s too short")));
    }
    for _ in 0..100 {
        let amp = Vec3::from_fn(|i, _| rng.uniform(-ranges.amplitude[i], ranges.amplitude[i]));
        let freq = Vec3::from_fn(|i, _| rng.uniform(-ranges.freq[i], ranges.freq[i]));
        let phase = Vec3::from_fn(|_, _| rng.choose(FRAC_PI_2, 3.0 * FRAC_PI_2));
        let mut spec = ReferenceSpec {
            amplitude: amp,
            freq,
            phase,
            t_s: ranges.t_s,
            t_e: t_f - ranges.end_margin,
            delta: ranges.delta,
            t_f,
            v_max: ranges.v_max,
            origin: ranges.origin,
            g: GRAVITY,
        };
        let peak = spec.peak_speed();
        if peak > spec.v_max {
            spec.amplitude *= spec.v_max / peak;
        }
        if min_tension_norm(&spec) > SINGULARITY_EPS {
            return Ok(spec);
        }
    }
    Err(Error::InvalidParams("no non-singular reference in 100 draws".into()))
}

/// Smallest `|a_P + g e3|` over the horizon at 10 ms resolution.
pub fn min_tension_norm(spec: &ReferenceSpec) -> f64 {
    let n = (spec.t_f / 0.01).ceil() as usize;
    (0..=n)
        .map(|k| {
            let d = payload_reference(k as f64 * 0.01, spec);
            (d.a + spec.g * e3()).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Window value and its first four time derivatives.
fn window_derivs(t: f64, spec: &ReferenceSpec) -> [f64; 5] {
    let dl = spec.delta;
    if t < spec.t_s || t > spec.t_e {
        return [0.0; 5];
    }
    if t < spec.t_s + dl {
        let a = (t - spec.t_s) / dl;
        return [
            3.0 * a * a - 2.0 * a.powi(3),
            (6.0 * a - 6.0 * a * a) / dl,
            (6.0 - 12.0 * a) / (dl * dl),
            -12.0 / dl.powi(3),
            0.0,
        ];
    }
    if t > spec.t_e - dl {
        let a = (spec.t_e - t) / dl;
        return [
            3.0 * a * a - 2.0 * a.powi(3),
            -(6.0 * a - 6.0 * a * a) / dl,
            (6.0 - 12.0 * a) / (dl * dl),
            12.0 / dl.powi(3),
            0.0,
        ];
    }
    [1.0, 0.0, 0.0, 0.0, 0.0]
}

/// Smoothstep window `w(t)` and `w'(t)`.
pub fn smooth_window(t: f64, spec: &ReferenceSpec) -> (f64, f64) {
    let w = window_derivs(t, spec);
    (w[0], w[1])
}

/// Payload reference and its derivatives up to snap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PayloadDerivs {
    pub x: Vec3,
    pub v: Vec3,
    pub a: Vec3,
    pub jerk: Vec3,
    pub snap: Vec3,
}

pub fn payload_reference(t: f64, spec: &ReferenceSpec) -> PayloadDerivs {
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    let w = window_derivs(t, spec);
    let mut out = [Vec3::zeros(); 5];
    for i in 0..3 {
        let a = spec.amplitude[i];
        let om = 2.0 * PI * spec.freq[i];
        let th = om * t + spec.phase[i];
        let (s, c) = th.sin_cos();
        let osc = [
            a * (1.0 - c),
            a * om * s,
            a * om * om * c,
            -a * om.powi(3) * s,
            -a * om.powi(4) * c,
        ];
        for n in 0..5 {
            out[n][i] = (0..=n).map(|k| BINOM[n][k] * w[k] * osc[n - k]).sum();
        }
    }
    PayloadDerivs {
        x: spec.origin + out[0],
        v: out[1],
        a: out[2],
        jerk: out[3],
        snap: out[4],
    }
}

/// Full reference at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSample {
    pub x_p: Vec3,
    pub v_p: Vec3,
    pub a_p: Vec3,
    pub x_q: Vec3,
    pub v_q: Vec3,
    pub a_q: Vec3,
    /// Desired cable direction, quadrotor to payload.
    pub q: Vec3,
    pub q_dot: Vec3,
    pub q_ddot: Vec3,
}

impl ReferenceSample {
    /// Static hover with the payload at `x_p` and the quadrotor `l` above.
    pub fn hover(x_p: Vec3, l: f64) -> Self {
        ReferenceSample {
            x_p,
            v_p: Vec3::zeros(),
            a_p: Vec3::zeros(),
            x_q: x_p + l * e3(),
            v_q: Vec3::zeros(),
            a_q: Vec3::zeros(),
            q: -e3(),
            q_dot: Vec3::zeros(),
            q_ddot: Vec3::zeros(),
        }
    }
}

/// Quadrotor reference from the payload reference. The cable direction is
/// the unit tension direction `-(a_P + g e3) / |a_P + g e3|`; the payload
/// mass cancels, so only the cable length `l` is needed.
pub fn quadrotor_reference(t: f64, spec: &ReferenceSpec, l: f64) -> Result<ReferenceSample> {
    let p = payload_reference(t, spec);
    let n = p.a + spec.g * e3();
    let r = n.norm();
    if !(r > SINGULARITY_EPS) {
        return Err(Error::Singularity { t, norm: r });
    }
    let n1 = p.jerk;
    let n2 = p.snap;
    let u = n / r;
    let r1 = u.dot(&n1);
    let u1 = (n1 - u * r1) / r;
    let r2 = u1.dot(&n1) + u.dot(&n2);
    let u2 = (n2 - 2.0 * u1 * r1 - u * r2) / r;
    let (q, q_dot, q_ddot) = (-u, -u1, -u2);
    Ok(ReferenceSample {
        x_p: p.x,
        v_p: p.v,
        a_p: p.a,
        x_q: p.x - l * q,
        v_q: p.v - l * q_dot,
        a_q: p.a - l * q_ddot,
        q,
        q_dot,
        q_ddot,
    })
}
