use super::model::{body_angular_accel, compliant_cable_tension, sync_taut, taut_accel};
use super::{guard_and_impact, CableMode, CableModel, ExternalLoad, SystemParams, SystemState};
use crate::actuation::forward_allocation;
use crate::error::{Error, Result};
use crate::math::{dexp_inv, e3, so3_exp, Rot3, Vec3};

/// Simulation step (500 Hz).
pub const DEFAULT_DT: f64 = 0.002;
/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Mode changes that happened during one step.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct StepEvent {
    /// Slack-to-taut impact (ideal model). Carries the pre-impact cable
    /// distance and kinetic energies before/after the impact map.
    pub impact: Option<ImpactInfo>,
    /// Taut-to-slack release.
    pub released: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpactInfo {
    pub distance: f64,
    pub ke_before: f64,
    pub ke_after: f64,
}

/// Integration coordinates: six 3-vectors whose meaning depends on the
/// mode, plus the rotation increment `phi` (`R = R0 exp(phi)`) and the
/// body rate.
///
/// * taut:      `[x_p, v_p, q, omega_cable, phi, Omega]`
/// * separated: `[x_q, v_q, x_p, v_p, phi, Omega]`
/// * rigid:     `[x_q, v_q, -, -, phi, Omega]`
type Slots = [Vec3; 6];

fn axpy(y: &Slots, h: f64, k: &Slots) -> Slots {
    std::array::from_fn(|i| y[i] + k[i] * h)
}

#[derive(Clone, Copy)]
enum Flow {
    Taut,
    SlackIdeal,
    Compliant,
    Rigid,
}

struct Inputs<'a> {
    f: f64,
    moment: Vec3,
    load: &'a ExternalLoad,
    params: &'a SystemParams,
    rot0: Rot3,
}

fn flow_derivative(flow: Flow, y: &Slots, u: &Inputs) -> Slots {
    let p = u.params;
    let rot = u.rot0.compose(&so3_exp(&y[4]));
    let thrust = rot.body_z() * u.f;
    let d_omega = body_angular_accel(&y[5], &(u.moment + u.load.moment), p);
    let d_phi = dexp_inv(&y[4], &y[5]);
    let g = p.g * e3();
    match flow {
        Flow::Taut => {
            let (dv_p, dw) = taut_accel(&y[2], &y[3], &thrust, &u.load.force, p);
            [y[1], dv_p, y[3].cross(&y[2]), dw, d_phi, d_omega]
        }
        Flow::SlackIdeal => [
            y[1],
            (thrust + u.load.force) / p.m_q - g,
            y[3],
            -g,
            d_phi,
            d_omega,
        ],
        Flow::Compliant => {
            let rel = y[2] - y[0];
            let d = rel.norm();
            let tension = if d > 0.0 && d >= p.cable_length {
                let unit = rel / d;
                let d_dot = unit.dot(&(y[3] - y[1]));
                let t = p.cable_stiffness * (d - p.cable_length) + p.cable_damping * d_dot;
                unit * t.max(0.0)
            } else {
                Vec3::zeros()
            };
            [
                y[1],
                (thrust + tension + u.load.force) / p.m_q - g,
                y[3],
                -tension / p.m_p - g,
                d_phi,
                d_omega,
            ]
        }
        Flow::Rigid => [
            y[1],
            (thrust + u.load.force) / p.rigid_mass() - g,
            Vec3::zeros(),
            Vec3::zeros(),
            d_phi,
            d_omega,
        ],
    }
}

fn rk4(flow: Flow, y0: &Slots, u: &Inputs, dt: f64) -> Slots {
    let k1 = flow_derivative(flow, y0, u);
    let k2 = flow_derivative(flow, &axpy(y0, 0.5 * dt, &k1), u);
    let k3 = flow_derivative(flow, &axpy(y0, 0.5 * dt, &k2), u);
    let k4 = flow_derivative(flow, &axpy(y0, dt, &k3), u);
    std::array::from_fn(|i| y0[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0))
}

/// Total thrust and body moment produced by the rotor thrusts, including the
/// moment of the thrust about an offset centre of mass.
pub(crate) fn rotor_wrench(rotor_thrusts: &[f64; 4], params: &SystemParams) -> (f64, Vec3) {
    let gained: [f64; 4] = std::array::from_fn(|i| rotor_thrusts[i] * params.rotor_gain[i]);
    let (f, m) = forward_allocation(&gained, params);
    // thrust acts at the geometric centre, located at -com_offset from the CoM
    let com_moment = (-params.com_offset).cross(&(e3() * f));
    (f, m + com_moment)
}

/// Advances the system by `dt` with the rotor thrusts held constant.
pub fn integrate_step(
    state: &SystemState,
    rotor_thrusts: &[f64; 4],
    load: &ExternalLoad,
    params: &SystemParams,
    model: CableModel,
    dt: f64,
) -> Result<SystemState> {
    step_detailed(state, rotor_thrusts, load, params, model, dt).map(|(s, _)| s)
}

/// [`integrate_step`] that also reports mode events.
pub fn step_detailed(
    state: &SystemState,
    rotor_thrusts: &[f64; 4],
    load: &ExternalLoad,
    params: &SystemParams,
    model: CableModel,
    dt: f64,
) -> Result<(SystemState, StepEvent)> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::InvalidParams(format!("time step {dt}")));
    }
    if rotor_thrusts.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("rotor thrusts"));
    }
    if let Some(t) = rotor_thrusts.iter().find(|&&t| t < 0.0) {
        return Err(Error::NegativeThrust(*t));
    }
    let (f, moment) = rotor_wrench(rotor_thrusts, params);
    let inputs = Inputs {
        f,
        moment,
        load,
        params,
        rot0: state.quad.rot,
    };

    let mut next = *state;
    let mut event = StepEvent::default();
    let flow = match (state.mode, model) {
        (CableMode::NoPayload, _) => Flow::Rigid,
        (_, CableModel::Compliant) => Flow::Compliant,
        (CableMode::Taut, CableModel::Ideal) => Flow::Taut,
        (CableMode::Slack, CableModel::Ideal) => Flow::SlackIdeal,
    };
    let y0: Slots = match flow {
        Flow::Taut => [
            state.payload.x,
            state.payload.v,
            state.q,
            state.omega_cable,
            Vec3::zeros(),
            state.quad.omega,
        ],
        _ => [
            state.quad.x,
            state.quad.v,
            state.payload.x,
            state.payload.v,
            Vec3::zeros(),
            state.quad.omega,
        ],
    };
    let y = rk4(flow, &y0, &inputs, dt);
    next.quad.rot = state.quad.rot.compose(&so3_exp(&y[4])).orthonormalized();
    next.quad.omega = y[5];

    match flow {
        Flow::Taut => {
            next.payload.x = y[0];
            next.payload.v = y[1];
            next.q = y[2];
            next.omega_cable = y[3];
            sync_taut(&mut next, params);
        }
        Flow::Rigid => {
            next.quad.x = y[0];
            next.quad.v = y[1];
            next.payload.x = y[0];
            next.payload.v = y[1];
        }
        Flow::SlackIdeal | Flow::Compliant => {
            next.quad.x = y[0];
            next.quad.v = y[1];
            next.payload.x = y[2];
            next.payload.v = y[3];
            let rel = next.payload.x - next.quad.x;
            let d = rel.norm();
            if d > 1e-12 {
                next.q = rel / d;
                next.omega_cable = next.q.cross(&((next.payload.v - next.quad.v) / d));
            }
        }
    }

    match flow {
        Flow::Compliant => {
            let slack_before = state.mode == CableMode::Slack;
            next.mode = if compliant_cable_tension(&next, params).norm() > 0.0 {
                CableMode::Taut
            } else {
                CableMode::Slack
            };
            event.released = !slack_before && next.mode == CableMode::Slack;
            if slack_before && next.mode == CableMode::Taut {
                let ke = next.kinetic_energy(params);
                event.impact = Some(ImpactInfo {
                    distance: next.cable_distance(),
                    ke_before: ke,
                    ke_after: ke,
                });
            }
        }
        Flow::Taut | Flow::SlackIdeal => {
            let thrust = next.quad.rot.body_z() * f;
            let before = next;
            let (mode, after) = guard_and_impact(&next, &thrust, &load.force, params);
            if state.mode == CableMode::Slack && mode == CableMode::Taut {
                event.impact = Some(ImpactInfo {
                    distance: before.cable_distance(),
                    ke_before: before.kinetic_energy(params),
                    ke_after: after.kinetic_energy(params),
                });
            }
            event.released = state.mode == CableMode::Taut && mode == CableMode::Slack;
            next = after;
        }
        Flow::Rigid => {}
    }

    if next.max_abs() > DIVERGENCE_LIMIT {
        return Err(Error::Divergence {
            t: f64::NAN,
            what: "state magnitude",
        });
    }
    Ok((next, event))
}
