use super::{CableMode, ExternalLoad, SystemParams, SystemState};
use crate::error::{Error, Result};
use crate::math::{e3, Vec3};

/// Time derivative of a [`SystemState`]. The attitude rate is carried as
/// the body angular velocity (`R' = R hat(Omega)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub x_q: Vec3,
    pub v_q: Vec3,
    pub omega_body: Vec3,
    pub omega_q: Vec3,
    pub x_p: Vec3,
    pub v_p: Vec3,
    pub q: Vec3,
    pub omega_cable: Vec3,
}

/// `J^-1 (M + w_M - Omega x J Omega)`.
pub(crate) fn body_angular_accel(omega: &Vec3, moment: &Vec3, params: &SystemParams) -> Vec3 {
    let j = &params.j_q;
    let rhs = moment - omega.cross(&(j * omega));
    j.cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| Vec3::new(rhs.x / j[(0, 0)], rhs.y / j[(1, 1)], rhs.z / j[(2, 2)]))
}

/// Taut-mode translational and cable accelerations for a thrust vector
/// `thrust = f R e3` (inertial). Returns `(v_p', omega_cable')`.
pub(crate) fn taut_accel(
    q: &Vec3,
    omega_cable: &Vec3,
    thrust: &Vec3,
    force: &Vec3,
    params: &SystemParams,
) -> (Vec3, Vec3) {
    let m = params.total_mass();
    let l = params.cable_length;
    let q_dot = omega_cable.cross(q);
    let along = q.dot(thrust) - params.m_q * l * q_dot.dot(&q_dot);
    let dv_p = (q * along + force) / m - params.g * e3();
    let dw = -q.cross(thrust) / (params.m_q * l);
    (dv_p, dw)
}

/// Cable tension implied by the ideal taut model, positive when pulling.
pub fn ideal_tension(state: &SystemState, thrust: &Vec3, force: &Vec3, params: &SystemParams) -> f64 {
    let (dv_p, _) = taut_accel(&state.q, &state.omega_cable, thrust, force, params);
    -params.m_p * (dv_p + params.g * e3()).dot(&state.q)
}

/// Spring-damper cable force acting on the quadrotor (pointing at the
/// payload); the payload feels its negative. Zero when the cable is shorter
/// than its rest length or the two bodies coincide.
pub fn compliant_cable_tension(state: &SystemState, params: &SystemParams) -> Vec3 {
    let rel = state.payload.x - state.quad.x;
    let d = rel.norm();
    if d == 0.0 || d < params.cable_length {
        return Vec3::zeros();
    }
    let u = rel / d;
    let d_dot = u.dot(&(state.payload.v - state.quad.v));
    let t = params.cable_stiffness * (d - params.cable_length) + params.cable_damping * d_dot;
    u * t.max(0.0)
}

fn check_inputs(f: f64, moment: &Vec3, load: &ExternalLoad) -> Result<()> {
    if !f.is_finite() || moment.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("thrust or moment"));
    }
    if load.force.iter().chain(load.moment.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("disturbance"));
    }
    if f < 0.0 {
        return Err(Error::NegativeThrust(f));
    }
    Ok(())
}

/// Derivative of the ideal hybrid model in the state's current mode.
///
/// `f` is the total thrust, `moment` the body moment (control plus any
/// centre-of-mass offset term), `load` the external disturbance.
pub fn hybrid_derivative(
    state: &SystemState,
    f: f64,
    moment: &Vec3,
    load: &ExternalLoad,
    params: &SystemParams,
) -> Result<StateDerivative> {
    check_inputs(f, moment, load)?;
    if state.max_abs() == f64::INFINITY {
        return Err(Error::NonFinite("state"));
    }
    let thrust = state.quad.rot.body_z() * f;
    let omega_q = body_angular_accel(&state.quad.omega, &(moment + load.moment), params);
    let quad_rot = state.quad.omega;
    let g = params.g * e3();
    let d = match state.mode {
        CableMode::Taut => {
            let l = params.cable_length;
            let q = state.q;
            let w = state.omega_cable;
            let (dv_p, dw) = taut_accel(&q, &w, &thrust, &load.force, params);
            let q_dot = w.cross(&q);
            let q_ddot = dw.cross(&q) + w.cross(&q_dot);
            StateDerivative {
                x_q: state.payload.v - l * q_dot,
                v_q: dv_p - l * q_ddot,
                omega_body: quad_rot,
                omega_q,
                x_p: state.payload.v,
                v_p: dv_p,
                q: q_dot,
                omega_cable: dw,
            }
        }
        CableMode::Slack => {
            let rel = state.payload.x - state.quad.x;
            let dist = rel.norm().max(1e-12);
            let rel_v = state.payload.v - state.quad.v;
            StateDerivative {
                x_q: state.quad.v,
                v_q: (thrust + load.force) / params.m_q - g,
                omega_body: quad_rot,
                omega_q,
                x_p: state.payload.v,
                v_p: -g,
                q: (rel_v - rel / dist * (rel / dist).dot(&rel_v)) / dist,
                omega_cable: Vec3::zeros(),
            }
        }
        CableMode::NoPayload => {
            let dv = (thrust + load.force) / params.rigid_mass() - g;
            StateDerivative {
                x_q: state.quad.v,
                v_q: dv,
                omega_body: quad_rot,
                omega_q,
                x_p: state.quad.v,
                v_p: dv,
                q: Vec3::zeros(),
                omega_cable: Vec3::zeros(),
            }
        }
    };
    Ok(d)
}

/// Derivative of the compliant (spring-damper cable) model. The disturbance
/// force acts on the quadrotor.
pub fn compliant_derivative(
    state: &SystemState,
    f: f64,
    moment: &Vec3,
    load: &ExternalLoad,
    params: &SystemParams,
) -> Result<StateDerivative> {
    if !params.has_payload() {
        return hybrid_derivative(state, f, moment, load, params);
    }
    check_inputs(f, moment, load)?;
    let thrust = state.quad.rot.body_z() * f;
    let tension = compliant_cable_tension(state, params);
    let g = params.g * e3();
    let dv_q = (thrust + tension + load.force) / params.m_q - g;
    let dv_p = -tension / params.m_p - g;
    let rel = state.payload.x - state.quad.x;
    let dist = rel.norm().max(1e-12);
    let u = rel / dist;
    let rel_v = state.payload.v - state.quad.v;
    let q_dot = (rel_v - u * u.dot(&rel_v)) / dist;
    Ok(StateDerivative {
        x_q: state.quad.v,
        v_q: dv_q,
        omega_body: state.quad.omega,
        omega_q: body_angular_accel(&state.quad.omega, &(moment + load.moment), params),
        x_p: state.payload.v,
        v_p: dv_p,
        q: q_dot,
        omega_cable: Vec3::zeros(),
    })
}

/// Inelastic slack-to-taut impact: removes the radial relative velocity
/// with a momentum-conserving impulse, places the bodies exactly one cable
/// length apart about their common centre of mass, and re-derives the cable
/// direction and angular velocity.
pub fn impact_map(state: &SystemState, params: &SystemParams) -> SystemState {
    let m_q = params.m_q;
    let m_p = params.m_p;
    let m = m_q + m_p;
    let l = params.cable_length;
    let rel = state.payload.x - state.quad.x;
    let dist = rel.norm();
    let u = if dist > 1e-12 { rel / dist } else { -e3() };
    let rel_v = state.payload.v - state.quad.v;
    let v_r = u.dot(&rel_v);

    let mut out = *state;
    out.quad.v += u * (m_p / m * v_r);
    out.payload.v -= u * (m_q / m * v_r);
    let com = (state.quad.x * m_q + state.payload.x * m_p) / m;
    out.quad.x = com - u * (m_p / m * l);
    out.payload.x = com + u * (m_q / m * l);
    out.q = u;
    let q_dot = (out.payload.v - out.quad.v) / l;
    out.omega_cable = u.cross(&q_dot);
    out.mode = CableMode::Taut;
    out
}

/// Guard evaluation for the ideal model. Slack becomes taut once the bodies
/// are a full cable length apart (with the impact map applied); taut becomes
/// slack once the implied tension is no longer positive.
pub fn guard_and_impact(
    state: &SystemState,
    thrust: &Vec3,
    force: &Vec3,
    params: &SystemParams,
) -> (CableMode, SystemState) {
    match state.mode {
        CableMode::NoPayload => (CableMode::NoPayload, *state),
        CableMode::Slack => {
            if state.cable_distance() >= params.cable_length {
                let s = impact_map(state, params);
                (CableMode::Taut, s)
            } else {
                (CableMode::Slack, *state)
            }
        }
        CableMode::Taut => {
            if ideal_tension(state, thrust, force, params) <= 0.0 {
                let mut s = *state;
                s.mode = CableMode::Slack;
                (CableMode::Slack, s)
            } else {
                (CableMode::Taut, *state)
            }
        }
    }
}

/// Re-derives the quadrotor translational state from the taut coordinates.
pub(crate) fn sync_taut(state: &mut SystemState, params: &SystemParams) {
    let l = params.cable_length;
    let q = state.q.normalize();
    // keep the cable rate perpendicular to the cable
    let w = state.omega_cable - q * q.dot(&state.omega_cable);
    state.q = q;
    state.omega_cable = w;
    state.quad.x = state.payload.x - l * q;
    state.quad.v = state.payload.v - l * w.cross(&q);
}
