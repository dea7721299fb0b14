//! CTBR actuation chain: normalized action to (thrust, body-rate setpoint),
//! per-axis rate PID, X-configuration mixer, rotor command delay and
//! first-order rotor lag.

use std::collections::VecDeque;

use crate::dynamics::SystemParams;
use crate::math::Vec3;

/// Normalized policy action, every component in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Action {
    pub a_c: f64,
    pub a_p: f64,
    pub a_q: f64,
    pub a_r: f64,
}

impl Action {
    pub fn new(a_c: f64, a_p: f64, a_q: f64, a_r: f64) -> Self {
        Action { a_c, a_p, a_q, a_r }
    }

    /// Builds an action from raw values, clipping each into `[-1, 1]`.
    /// Non-finite entries become zero.
    pub fn clipped(v: [f64; 4]) -> Self {
        let c = |x: f64| if x.is_finite() { x.clamp(-1.0, 1.0) } else { 0.0 };
        Action::new(c(v[0]), c(v[1]), c(v[2]), c(v[3]))
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a_c, self.a_p, self.a_q, self.a_r]
    }

    /// Action that commands hover thrust for `mass` and zero body rates.
    pub fn hover(mass: f64, params: &SystemParams) -> Self {
        Action::clipped([2.0 * mass * params.g / params.f_max - 1.0, 0.0, 0.0, 0.0])
    }
}

/// Total thrust and body moment.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct WrenchCommand {
    pub f: f64,
    pub moment: Vec3,
}

/// `f = f_max/2 (1 + a_c)`, `Omega_d = Omega_max (a_p, a_q, a_r)`.
pub fn map_action(a: &Action, params: &SystemParams) -> (f64, Vec3) {
    let f = 0.5 * params.f_max * (1.0 + a.a_c);
    let omega_d = params.omega_max * Vec3::new(a.a_p, a.a_q, a.a_r);
    (f, omega_d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateGains {
    pub kp: Vec3,
    pub ki: Vec3,
    pub kd: Vec3,
    pub integral_limit: Vec3,
    pub m_max: f64,
    pub m_min: f64,
}

impl Default for RateGains {
    fn default() -> Self {
        RateGains {
            kp: Vec3::new(0.1, 0.1, 0.05),
            ki: Vec3::new(0.05, 0.05, 0.025),
            kd: Vec3::new(0.002, 0.002, 0.001),
            integral_limit: Vec3::repeat(0.5),
            m_max: 0.1,
            m_min: -0.1,
        }
    }
}

/// Per-axis body-rate PID with output saturation and clamping anti-windup.
#[derive(Clone, Debug, PartialEq)]
pub struct RatePid {
    pub gains: RateGains,
    pub integral: Vec3,
    pub prev_error: Vec3,
    primed: bool,
}

impl RatePid {
    pub fn new(gains: RateGains) -> Self {
        RatePid {
            gains,
            integral: Vec3::zeros(),
            prev_error: Vec3::zeros(),
            primed: false,
        }
    }

    pub fn reset(&mut self) {
        self.integral = Vec3::zeros();
        self.prev_error = Vec3::zeros();
        self.primed = false;
    }

    /// One controller update. The derivative term is zero on the first call
    /// after a reset so a setpoint present at start-up produces no kick.
    pub fn step(&mut self, omega: &Vec3, omega_d: &Vec3, dt: f64) -> Vec3 {
        let g = &self.gains;
        let e = omega_d - omega;
        let de = if self.primed { (e - self.prev_error) / dt } else { Vec3::zeros() };
        let mut m = Vec3::zeros();
        for i in 0..3 {
            let lim = g.integral_limit[i];
            let candidate = (self.integral[i] + e[i] * dt).clamp(-lim, lim);
            let unsat = g.kp[i] * e[i] + g.ki[i] * candidate + g.kd[i] * de[i];
            let pushing_up = unsat > g.m_max && e[i] > 0.0;
            let pushing_down = unsat < g.m_min && e[i] < 0.0;
            let out = if pushing_up || pushing_down {
                // integrating further would only deepen the saturation
                g.kp[i] * e[i] + g.ki[i] * self.integral[i] + g.kd[i] * de[i]
            } else {
                self.integral[i] = candidate;
                unsat
            };
            m[i] = out.clamp(g.m_min, g.m_max);
        }
        self.prev_error = e;
        self.primed = true;
        m
    }
}

/// Rotor positions in the body frame (x, y) and spin directions for the X
/// layout. Rotor `i` produces a yaw moment `torque_coeff * spin[i] * T_i`.
pub fn rotor_layout(params: &SystemParams) -> ([(f64, f64); 4], [f64; 4]) {
    let d = params.arm_length / std::f64::consts::SQRT_2;
    ([(d, -d), (-d, d), (d, d), (-d, -d)], [1.0, 1.0, -1.0, -1.0])
}

/// Total thrust and body moment produced by four rotor thrusts.
pub fn forward_allocation(thrusts: &[f64; 4], params: &SystemParams) -> (f64, Vec3) {
    let (pos, spin) = rotor_layout(params);
    let mut f = 0.0;
    let mut m = Vec3::zeros();
    for i in 0..4 {
        let t = thrusts[i];
        f += t;
        m.x += pos[i].1 * t;
        m.y -= pos[i].0 * t;
        m.z += params.torque_coeff * spin[i] * t;
    }
    (f, m)
}

/// Rotor thrusts for a desired `(f, M)`, clipped to `[0, f_max / 4]` per
/// rotor. The allocation rows are mutually orthogonal, so the inverse is the
/// transpose scaled by the squared row norms.
pub fn mix_to_rotors(f: f64, moment: &Vec3, params: &SystemParams) -> [f64; 4] {
    let (pos, spin) = rotor_layout(params);
    let d2 = pos[0].0 * pos[0].0 * 4.0;
    let c2 = params.torque_coeff * params.torque_coeff * 4.0;
    let max = params.rotor_max();
    std::array::from_fn(|i| {
        let t = f / 4.0 + pos[i].1 * moment.x / d2 - pos[i].0 * moment.y / d2
            + params.torque_coeff * spin[i] * moment.z / c2;
        t.clamp(0.0, max)
    })
}

/// Rotor command delay line plus asymmetric first-order rotor lag.
#[derive(Clone, Debug, PartialEq)]
pub struct MotorState {
    pub thrusts: [f64; 4],
    /// Command currently tracked by the rotors (last one out of the queue).
    pub active: [f64; 4],
    pub queue: VecDeque<(f64, [f64; 4])>,
}

impl MotorState {
    /// Rotors already spinning at `thrusts` with no pending commands.
    pub fn steady(thrusts: [f64; 4]) -> Self {
        MotorState {
            thrusts,
            active: thrusts,
            queue: VecDeque::new(),
        }
    }

    /// Enqueues `commanded` at time `t`, releases every command at least
    /// `delay` old, then advances the rotor lag by `dt`. Returns the thrusts
    /// applied over the step.
    pub fn step(&mut self, commanded: &[f64; 4], t: f64, dt: f64, params: &SystemParams) -> [f64; 4] {
        let max = params.rotor_max();
        let cmd = commanded.map(|c| c.clamp(0.0, max));
        self.queue.push_back((t, cmd));
        // tolerance absorbs accumulated floating-point error in t
        let tol = 1e-9 * (1.0 + t.abs());
        while let Some(&(stamp, c)) = self.queue.front() {
            if t - stamp + tol >= params.delay {
                self.active = c;
                self.queue.pop_front();
            } else {
                break;
            }
        }
        let up = 1.0 - (-dt / params.rotor_tau_up).exp();
        let down = 1.0 - (-dt / params.rotor_tau_down).exp();
        for i in 0..4 {
            let gap = self.active[i] - self.thrusts[i];
            let k = if gap > 0.0 { up } else { down };
            self.thrusts[i] += k * gap;
        }
        self.thrusts
    }
}

/// Free-function form of [`MotorState::step`].
pub fn motor_and_delay_step(
    m: &mut MotorState,
    commanded: &[f64; 4],
    t: f64,
    dt: f64,
    params: &SystemParams,
) -> [f64; 4] {
    m.step(commanded, t, dt, params)
}
