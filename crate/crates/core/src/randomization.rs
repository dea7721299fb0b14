//! Per-episode domain randomization, initial-state perturbations and
//! impulse disturbances.

use std::f64::consts::PI;

use crate::dynamics::{CableModel, Disturbance, QuadrotorState, SystemParams, SystemState};
use crate::math::{so3_exp, Mat3, Rot3, RngStream, Vec3};

/// Randomization widths. Scale entries are symmetric relative fractions
/// (`0.1` means uniform in `[0.9, 1.1]` times nominal).
#[derive(Clone, Debug, PartialEq)]
pub struct RandomizationRanges {
    pub mass_scale: f64,
    pub inertia_scale: f64,
    /// Max rotation of the principal inertia axes, rad.
    pub inertia_tilt: f64,
    /// Half-width of the CoM offset box, m.
    pub com_offset_max: f64,
    pub gear_scale: f64,
    pub m_p_range: (f64, f64),
    pub l_range: (f64, f64),
    pub rotor_tau_scale: f64,
    pub delay_range: (f64, f64),
    /// Probability that an episode starts with a slack cable.
    pub slack_probability: f64,
    /// Initial payload distance for slack starts, as a fraction of `l`.
    pub slack_fraction: f64,
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        RandomizationRanges {
            mass_scale: 0.1,
            inertia_scale: 0.1,
            inertia_tilt: 5f64.to_radians(),
            com_offset_max: 0.01,
            gear_scale: 0.05,
            m_p_range: (0.0, 0.2),
            l_range: (0.0, 1.0),
            rotor_tau_scale: 0.3,
            delay_range: (0.010, 0.030),
            slack_probability: 0.2,
            slack_fraction: 0.7,
        }
    }
}

impl RandomizationRanges {
    /// Every width zero, payload and delay pinned to the nominal values.
    pub fn none(nominal: &SystemParams) -> Self {
        RandomizationRanges {
            mass_scale: 0.0,
            inertia_scale: 0.0,
            inertia_tilt: 0.0,
            com_offset_max: 0.0,
            gear_scale: 0.0,
            m_p_range: (nominal.m_p, nominal.m_p),
            l_range: (nominal.cable_length, nominal.cable_length),
            rotor_tau_scale: 0.0,
            delay_range: (nominal.delay, nominal.delay),
            slack_probability: 0.0,
            slack_fraction: 0.7,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ordered = |r: (f64, f64)| r.0 <= r.1 && r.0 >= 0.0;
        let fractions = [self.mass_scale, self.inertia_scale, self.gear_scale, self.rotor_tau_scale];
        if !ordered(self.m_p_range) || !ordered(self.l_range) || !ordered(self.delay_range) {
            return Err(crate::Error::Config("randomization ranges must be ordered and non-negative".into()));
        }
        if fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
            return Err(crate::Error::Config("scale fractions must lie in [0, 1)".into()));
        }
        if self.com_offset_max < 0.0 || self.inertia_tilt < 0.0 || !(0.0..=1.0).contains(&self.slack_probability) {
            return Err(crate::Error::Config("invalid randomization width".into()));
        }
        Ok(())
    }
}

fn scale(rng: &mut RngStream, frac: f64) -> f64 {
    rng.uniform(1.0 - frac, 1.0 + frac)
}

/// Draws one episode's physical parameters around `nominal`.
pub fn randomize_params(nominal: &SystemParams, ranges: &RandomizationRanges, rng: &mut RngStream) -> SystemParams {
    let mut p = nominal.clone();
    p.m_q = nominal.m_q * scale(rng, ranges.mass_scale);
    let diag = Vec3::from_fn(|i, _| nominal.j_q[(i, i)] * scale(rng, ranges.inertia_scale));
    let tilt = rng.unit_vector() * rng.uniform(0.0, ranges.inertia_tilt);
    let r = so3_exp(&tilt);
    let rm = r.matrix();
    let j = rm * Mat3::from_diagonal(&diag) * rm.transpose();
    p.j_q = 0.5 * (j + j.transpose());
    p.com_offset = rng.uniform_box(ranges.com_offset_max);
    p.rotor_gain = std::array::from_fn(|_| scale(rng, ranges.gear_scale));
    p.m_p = rng.uniform(ranges.m_p_range.0, ranges.m_p_range.1);
    p.cable_length = rng.uniform(ranges.l_range.0, ranges.l_range.1);
    p.rotor_tau_up = nominal.rotor_tau_up * scale(rng, ranges.rotor_tau_scale);
    p.rotor_tau_down = nominal.rotor_tau_down * scale(rng, ranges.rotor_tau_scale);
    p.delay = rng.uniform(ranges.delay_range.0, ranges.delay_range.1);
    p
}

/// Half-widths of the initial perturbation box.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationRanges {
    pub position: f64,
    pub velocity: f64,
    pub attitude: f64,
    pub body_rate: f64,
}

impl Default for PerturbationRanges {
    fn default() -> Self {
        PerturbationRanges {
            position: 0.1,
            velocity: 0.1,
            attitude: PI / 12.0,
            body_rate: PI / 12.0,
        }
    }
}

impl PerturbationRanges {
    pub fn zero() -> Self {
        PerturbationRanges {
            position: 0.0,
            velocity: 0.0,
            attitude: 0.0,
            body_rate: 0.0,
        }
    }
}

/// Offsets applied to an initial state. Position and velocity offsets shift
/// quadrotor and payload together.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct InitialPerturbation {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Roll, pitch, yaw offsets.
    pub euler: Vec3,
    pub body_rate: Vec3,
}

pub fn sample_initial_perturbation(rng: &mut RngStream, ranges: &PerturbationRanges) -> InitialPerturbation {
    InitialPerturbation {
        position: rng.uniform_box(ranges.position),
        velocity: rng.uniform_box(ranges.velocity),
        euler: rng.uniform_box(ranges.attitude),
        body_rate: rng.uniform_box(ranges.body_rate),
    }
}

impl InitialPerturbation {
    pub fn apply(&self, state: &SystemState) -> SystemState {
        let mut s = *state;
        s.quad.x += self.position;
        s.payload.x += self.position;
        s.quad.v += self.velocity;
        s.payload.v += self.velocity;
        let r = Rot3::from_euler_zyx(self.euler.x, self.euler.y, self.euler.z);
        s.quad.rot = r.compose(&s.quad.rot);
        s.quad.omega += self.body_rate;
        s
    }
}

/// Initial hanging state for a randomized episode: taut below the
/// quadrotor, or with probability `slack_probability` held at
/// `slack_fraction * l` so the episode starts slack.
pub fn initial_state(
    x_q: Vec3,
    params: &SystemParams,
    model: CableModel,
    ranges: &RandomizationRanges,
    rng: &mut RngStream,
) -> SystemState {
    let slack = rng.unit() < ranges.slack_probability;
    if !slack || !params.has_payload() {
        return SystemState::hanging(x_q, params, model);
    }
    let quad = QuadrotorState {
        x: x_q,
        v: Vec3::zeros(),
        rot: Rot3::identity(),
        omega: Vec3::zeros(),
    };
    let x_p = x_q - Vec3::z() * (ranges.slack_fraction * params.cable_length);
    SystemState::with_payload_at(quad, x_p, params)
}

/// Bounds of the impulse disturbance.
#[derive(Clone, Debug, PartialEq)]
pub struct DisturbanceRanges {
    pub force: f64,
    pub moment: f64,
    pub max_duration: f64,
}

impl Default for DisturbanceRanges {
    fn default() -> Self {
        DisturbanceRanges {
            force: 0.5,
            moment: 0.005,
            max_duration: 0.5,
        }
    }
}

/// Impulse with a start time uniform on `[t_lo, t_hi]`.
pub fn sample_impulse_disturbance(rng: &mut RngStream, ranges: &DisturbanceRanges, t_lo: f64, t_hi: f64) -> Disturbance {
    Disturbance {
        w_f: rng.uniform_box(ranges.force),
        w_m: rng.uniform_box(ranges.moment),
        duration: rng.uniform(0.0, ranges.max_duration),
        t_start: rng.uniform(t_lo, t_hi),
    }
}
