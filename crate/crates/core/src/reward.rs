//! Shaped tracking reward and early-termination checks.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;

use crate::actuation::Action;
use crate::dynamics::SystemState;
use crate::reference::ReferenceSample;

/// Weights `w` and scales `alpha` for the six terms, in the order
/// payload position, yaw, body rate, cable rate, action, action change.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardConfig {
    pub weights: [f64; 6],
    pub scales: [f64; 6],
    /// Decay of the action-change average (newest change has weight 1).
    pub rho: f64,
    /// Number of recent actions kept for the action-change term.
    pub window: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            weights: [1.0; 6],
            scales: [5.0, 1.0, 0.5, 0.5, 0.1, 1.0],
            rho: 0.8,
            window: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardTerms {
    pub x_p: f64,
    pub yaw: f64,
    pub omega: f64,
    pub q_dot: f64,
    pub action: f64,
    pub action_change: f64,
}

impl RewardTerms {
    pub fn to_array(self) -> [f64; 6] {
        [self.x_p, self.yaw, self.omega, self.q_dot, self.action, self.action_change]
    }

    pub fn total(&self) -> f64 {
        self.x_p * (1.0 + self.yaw + self.omega + self.q_dot) + self.action + self.action_change
    }
}

/// Most recent actions, newest last, bounded by the reward window.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActionHistory {
    actions: VecDeque<Action>,
    capacity: usize,
}

impl ActionHistory {
    pub fn new(capacity: usize) -> Self {
        ActionHistory {
            actions: VecDeque::with_capacity(capacity + 1),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, a: Action) {
        if self.actions.len() == self.capacity {
            self.actions.pop_front();
        }
        self.actions.push_back(a);
    }

    pub fn clear(&mut self) {
        self.actions.clear();
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Exponentially weighted RMS of successive action differences:
    /// `sqrt(sum_k rho^k |a_{t-k} - a_{t-k-1}|^2 / sum_k rho^k)`.
    pub fn weighted_change(&self, rho: f64) -> f64 {
        let n = self.actions.len();
        if n < 2 {
            return 0.0;
        }
        let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
        for k in 0..n - 1 {
            let a = self.actions[n - 1 - k].to_array();
            let b = self.actions[n - 2 - k].to_array();
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            num += w * d2;
            den += w;
            w *= rho;
        }
        (num / den).sqrt()
    }
}

/// Yaw from the ZYX decomposition of the attitude.
pub fn yaw(state: &SystemState) -> f64 {
    state.quad.rot.euler_zyx().2
}

/// Cable rate proxy `|v_P - v_Q| / l`; zero without a cable.
pub fn cable_rate(state: &SystemState, l: f64) -> f64 {
    if l > 0.0 {
        (state.payload.v - state.quad.v).norm() / l
    } else {
        0.0
    }
}

/// Reward for the state reached after applying `a`; `history` must already
/// contain `a` as its newest entry.
pub fn compute_reward(
    state: &SystemState,
    r: &ReferenceSample,
    a: &Action,
    history: &ActionHistory,
    cable_length: f64,
    cfg: &RewardConfig,
) -> (f64, RewardTerms) {
    let w = &cfg.weights;
    let s = &cfg.scales;
    let term = |k: usize, x: f64| w[k] * (-s[k] * x).exp();
    let a_norm = a.to_array().iter().map(|x| x * x).sum::<f64>().sqrt();
    let terms = RewardTerms {
        x_p: term(0, (state.payload.x - r.x_p).norm()),
        yaw: term(1, yaw(state).abs()),
        omega: term(2, state.quad.omega.norm()),
        q_dot: term(3, cable_rate(state, cable_length)),
        action: term(4, a_norm),
        action_change: term(5, history.weighted_change(cfg.rho)),
    };
    (terms.total(), terms)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerminationConfig {
    pub eps_pos: f64,
    pub eps_vel: f64,
    pub attitude_limit: f64,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        TerminationConfig {
            eps_pos: 1.0,
            eps_vel: 5.0,
            attitude_limit: FRAC_PI_2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Ground,
    PositionError,
    VelocityError,
    Attitude,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Ground => "ground",
            Termination::PositionError => "position_error",
            Termination::VelocityError => "velocity_error",
            Termination::Attitude => "attitude",
        }
    }
}

pub fn check_termination(state: &SystemState, r: &ReferenceSample, cfg: &TerminationConfig) -> Option<Termination> {
    if state.quad.x.z < 0.0 {
        return Some(Termination::Ground);
    }
    if (state.payload.x - r.x_p).norm() > cfg.eps_pos {
        return Some(Termination::PositionError);
    }
    if (state.payload.v - r.v_p).norm() > cfg.eps_vel {
        return Some(Termination::VelocityError);
    }
    let (roll, pitch, yaw) = state.quad.rot.euler_zyx();
    if [roll, pitch, yaw].iter().any(|x| x.abs() > cfg.attitude_limit) {
        return Some(Termination::Attitude);
    }
    None
}
