//! Hybrid quadrotor / cable-suspended payload dynamics.
//!
//! Two cable models are provided:
//!
//! * [`CableModel::Ideal`]: massless inextensible cable with explicit taut and
//!   slack modes, guard conditions and an inelastic impact map.
//! * [`CableModel::Compliant`]: unilateral spring-damper link; the mode label
//!   follows the sign of the spring force and no guard logic is needed.
//!
//! When the payload mass or the cable length is zero the payload is carried
//! rigidly and its state aliases the quadrotor's.

mod ground;
mod integrate;
mod model;

pub use ground::{ground_effect_force, GROUND_EFFECT_HEIGHT, GROUND_EFFECT_MAX_FORCE};
pub use integrate::{integrate_step, step_detailed, StepEvent, DEFAULT_DT, DIVERGENCE_LIMIT};
pub use model::{
    compliant_cable_tension, compliant_derivative, guard_and_impact, hybrid_derivative,
    ideal_tension, impact_map, StateDerivative,
};

use crate::error::{Error, Result};
use crate::math::{e3, Mat3, Rot3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadrotorState {
    pub x: Vec3,
    pub v: Vec3,
    pub rot: Rot3,
    /// Body-frame angular velocity.
    pub omega: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PayloadState {
    pub x: Vec3,
    pub v: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CableMode {
    Taut,
    Slack,
    NoPayload,
}

impl CableMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CableMode::Taut => "taut",
            CableMode::Slack => "slack",
            CableMode::NoPayload => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CableModel {
    Ideal,
    #[default]
    Compliant,
}

/// Full continuous state plus the active cable mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemState {
    pub quad: QuadrotorState,
    pub payload: PayloadState,
    pub mode: CableMode,
    /// Unit cable direction, quadrotor to payload.
    pub q: Vec3,
    /// Cable angular velocity, kept perpendicular to `q`.
    pub omega_cable: Vec3,
}

impl SystemState {
    /// Quadrotor level at `x_q`, at rest, with the payload hanging straight
    /// below. For the compliant model the cable carries its static stretch.
    pub fn hanging(x_q: Vec3, params: &SystemParams, model: CableModel) -> Self {
        let quad = QuadrotorState {
            x: x_q,
            v: Vec3::zeros(),
            rot: Rot3::identity(),
            omega: Vec3::zeros(),
        };
        if !params.has_payload() {
            return Self::rigid(quad);
        }
        let stretch = match model {
            CableModel::Ideal => 0.0,
            CableModel::Compliant => params.m_p * params.g / params.cable_stiffness,
        };
        let q = -e3();
        SystemState {
            quad,
            payload: PayloadState {
                x: x_q + q * (params.cable_length + stretch),
                v: Vec3::zeros(),
            },
            mode: CableMode::Taut,
            q,
            omega_cable: Vec3::zeros(),
        }
    }

    /// Quadrotor and payload at independent positions, both at rest. The
    /// mode is derived from the separation.
    pub fn with_payload_at(quad: QuadrotorState, x_p: Vec3, params: &SystemParams) -> Self {
        if !params.has_payload() {
            return Self::rigid(quad);
        }
        let d = x_p - quad.x;
        let dist = d.norm();
        let q = if dist > 1e-12 { d / dist } else { -e3() };
        SystemState {
            quad,
            payload: PayloadState {
                x: x_p,
                v: quad.v,
            },
            mode: if dist >= params.cable_length {
                CableMode::Taut
            } else {
                CableMode::Slack
            },
            q,
            omega_cable: Vec3::zeros(),
        }
    }

    /// Quadrotor without a cable; the payload slot mirrors the quadrotor.
    pub fn rigid(quad: QuadrotorState) -> Self {
        SystemState {
            quad,
            payload: PayloadState {
                x: quad.x,
                v: quad.v,
            },
            mode: CableMode::NoPayload,
            q: -e3(),
            omega_cable: Vec3::zeros(),
        }
    }

    pub fn cable_distance(&self) -> f64 {
        (self.payload.x - self.quad.x).norm()
    }

    /// Translational and rotational kinetic energy.
    pub fn kinetic_energy(&self, params: &SystemParams) -> f64 {
        let rot = 0.5 * self.quad.omega.dot(&(params.j_q * self.quad.omega));
        match self.mode {
            CableMode::NoPayload => {
                0.5 * params.rigid_mass() * self.quad.v.norm_squared() + rot
            }
            _ => {
                0.5 * params.m_q * self.quad.v.norm_squared()
                    + 0.5 * params.m_p * self.payload.v.norm_squared()
                    + rot
            }
        }
    }

    /// Kinetic plus gravitational potential energy (zero level at z = 0).
    pub fn mechanical_energy(&self, params: &SystemParams) -> f64 {
        let pe = match self.mode {
            CableMode::NoPayload => params.rigid_mass() * params.g * self.quad.x.z,
            _ => params.g * (params.m_q * self.quad.x.z + params.m_p * self.payload.x.z),
        };
        self.kinetic_energy(params) + pe
    }

    /// Largest absolute state component, used for divergence detection.
    pub(crate) fn max_abs(&self) -> f64 {
        let vs = [
            self.quad.x,
            self.quad.v,
            self.quad.omega,
            self.payload.x,
            self.payload.v,
            self.omega_cable,
        ];
        vs.iter()
            .flat_map(|v| v.iter().copied())
            .chain(self.quad.rot.to_row_major())
            .fold(0.0f64, |m, x| if x.is_finite() { m.max(x.abs()) } else { f64::INFINITY })
    }
}

/// Physical constants of the quadrotor, cable and rotors.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub m_q: f64,
    pub j_q: Mat3,
    pub m_p: f64,
    pub cable_length: f64,
    /// Max total thrust.
    pub f_max: f64,
    /// Max commanded body rate.
    pub omega_max: f64,
    pub g: f64,
    pub cable_stiffness: f64,
    pub cable_damping: f64,
    pub arm_length: f64,
    /// Yaw moment per unit rotor thrust.
    pub torque_coeff: f64,
    pub rotor_tau_up: f64,
    pub rotor_tau_down: f64,
    /// Input delay of the rotor commands.
    pub delay: f64,
    /// Centre of mass relative to the geometric centre, body frame.
    pub com_offset: Vec3,
    /// Per-rotor thrust gain (motor gear inconsistencies).
    pub rotor_gain: [f64; 4],
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl SystemParams {
    /// Nominal platform with the 0.2 kg payload on a 1 m cable.
    pub fn nominal() -> Self {
        SystemParams {
            m_q: 0.835,
            j_q: Mat3::from_diagonal(&Vec3::new(4.01e-3, 3.58e-3, 6.36e-3)),
            m_p: 0.2,
            cable_length: 1.0,
            f_max: 30.0,
            omega_max: 10.0,
            g: 9.81,
            cable_stiffness: 500.0,
            cable_damping: 5.0,
            arm_length: 0.15,
            torque_coeff: 0.016,
            rotor_tau_up: 0.030,
            rotor_tau_down: 0.060,
            delay: 0.020,
            com_offset: Vec3::zeros(),
            rotor_gain: [1.0; 4],
        }
    }

    pub fn with_payload(mut self, m_p: f64, cable_length: f64) -> Self {
        self.m_p = m_p;
        self.cable_length = cable_length;
        self
    }

    /// True when a cable with a non-zero mass at its end is attached.
    pub fn has_payload(&self) -> bool {
        self.m_p > 0.0 && self.cable_length > 0.0
    }

    /// Mass moved by the rotors when the payload is carried rigidly.
    pub fn rigid_mass(&self) -> f64 {
        self.m_q + self.m_p
    }

    pub fn total_mass(&self) -> f64 {
        self.m_q + self.m_p
    }

    pub fn rotor_max(&self) -> f64 {
        self.f_max / 4.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        let finite = [
            self.m_q,
            self.m_p,
            self.cable_length,
            self.f_max,
            self.omega_max,
            self.g,
            self.cable_stiffness,
            self.cable_damping,
            self.arm_length,
            self.torque_coeff,
            self.rotor_tau_up,
            self.rotor_tau_down,
            self.delay,
        ];
        if finite.iter().any(|x| !x.is_finite()) || self.j_q.iter().any(|x| !x.is_finite()) {
            return bad("non-finite parameter");
        }
        if self.m_q <= 0.0 {
            return bad("m_q must be positive");
        }
        if self.m_p < 0.0 || self.cable_length < 0.0 {
            return bad("payload mass and cable length must be non-negative");
        }
        if self.f_max <= 0.0 || self.cable_stiffness <= 0.0 || self.cable_damping < 0.0 {
            return bad("f_max and cable stiffness must be positive, damping non-negative");
        }
        if (0..3).any(|i| self.j_q[(i, i)] <= 0.0) {
            return bad("inertia diagonal must be positive");
        }
        if self.j_q.symmetric_eigenvalues().iter().any(|&e| e <= 0.0) {
            return bad("inertia must be positive definite");
        }
        if self.arm_length <= 0.0 || self.torque_coeff <= 0.0 {
            return bad("rotor geometry must be positive");
        }
        if self.rotor_tau_up <= 0.0 || self.rotor_tau_down <= 0.0 || self.delay < 0.0 {
            return bad("rotor time constants must be positive, delay non-negative");
        }
        if self.rotor_gain.iter().any(|&k| !(k > 0.0)) {
            return bad("rotor gains must be positive");
        }
        Ok(())
    }
}

/// Scheduled impulse disturbance.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Disturbance {
    /// Inertial-frame force.
    pub w_f: Vec3,
    /// Body-frame moment.
    pub w_m: Vec3,
    pub t_start: f64,
    pub duration: f64,
}

impl Disturbance {
    /// Active on `[t_start, t_start + duration)`.
    pub fn is_active(&self, t: f64) -> bool {
        self.duration > 0.0 && t >= self.t_start && t < self.t_start + self.duration
    }

    pub fn load_at(&self, t: f64) -> ExternalLoad {
        if self.is_active(t) {
            ExternalLoad {
                force: self.w_f,
                moment: self.w_m,
            }
        } else {
            ExternalLoad::default()
        }
    }
}

/// External force (inertial) and moment (body) acting during one step.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ExternalLoad {
    pub force: Vec3,
    pub moment: Vec3,
}

impl std::ops::Add for ExternalLoad {
    type Output = ExternalLoad;
    fn add(self, rhs: ExternalLoad) -> ExternalLoad {
        ExternalLoad {
            force: self.force + rhs.force,
            moment: self.moment + rhs.moment,
        }
    }
}
