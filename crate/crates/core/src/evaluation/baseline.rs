//! Geometric SE(3) tracking controller used as a reference oracle.
//!
//! The vehicle is treated as one rigid body of mass `m_Q + m_P` tracking the
//! quadrotor reference, which is adequate for small payload swing.

use crate::actuation::WrenchCommand;
use crate::dynamics::{SystemParams, SystemState};
use crate::math::{e3, vee, Mat3, Vec3};
use crate::reference::ReferenceSample;

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricGains {
    pub k_x: f64,
    pub k_v: f64,
    pub k_r: f64,
    pub k_omega: f64,
}

impl Default for GeometricGains {
    /// Attitude gains put the rotational loop near 10 rad/s with damping
    /// 0.8 for the nominal inertia, slow enough for the rotor delay and lag.
    fn default() -> Self {
        GeometricGains {
            k_x: 8.0,
            k_v: 4.0,
            k_r: 0.4,
            k_omega: 0.064,
        }
    }
}

/// Desired attitude with body z along `b3` and zero yaw.
fn desired_attitude(b3: &Vec3) -> Mat3 {
    let b1c = Vec3::x();
    let mut b2 = b3.cross(&b1c);
    if b2.norm() < 1e-6 {
        b2 = Vec3::y();
    }
    let b2 = b2.normalize();
    let b1 = b2.cross(b3);
    Mat3::from_columns(&[b1, b2, *b3])
}

pub fn geometric_control(
    state: &SystemState,
    r: &ReferenceSample,
    params: &SystemParams,
    gains: &GeometricGains,
) -> WrenchCommand {
    let m = params.total_mass();
    let quad = &state.quad;
    let e_x = quad.x - r.x_q;
    let e_v = quad.v - r.v_q;
    let f_d = m * (r.a_q + params.g * e3()) - gains.k_x * e_x - gains.k_v * e_v;
    let rot = quad.rot.matrix();
    let f = f_d.dot(&(rot * e3())).clamp(0.0, params.f_max);

    let b3 = if f_d.norm() > 1e-9 { f_d.normalize() } else { e3() };
    let rd = desired_attitude(&b3);
    let e_r = 0.5 * vee(&(rd.transpose() * rot - rot.transpose() * rd));
    // the desired body rate is neglected; the reference is slow
    let e_omega = quad.omega;
    let j = &params.j_q;
    let moment = -gains.k_r * e_r - gains.k_omega * e_omega + quad.omega.cross(&(j * quad.omega));
    WrenchCommand { f, moment }
}
