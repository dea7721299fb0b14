//! Policy observation: noisy normalized state, body-frame tracking errors,
//! previous action, I/O history and reference preview.
//!
//! Layout of one observation with history length `H` and preview length `F`:
//!
//! | block      | size   | content                                            |
//! |------------|--------|----------------------------------------------------|
//! | state      | 26     | `x_Q R x_P v_Q Omega v_P m_P l` (see [`normalized_state`]) |
//! | error      | 12     | `R^T` of the `x_P v_P x_Q v_Q` errors              |
//! | action     | 4      | previous action                                    |
//! | history    | 42 H   | oldest first, zero-padded at the front             |
//! | preview    | 12 F   | `x_P` differences for `t+1..t+F`, then `v_P`, `x_Q`, `v_Q` |

use std::collections::VecDeque;

use crate::actuation::Action;
use crate::dynamics::{SystemParams, SystemState};
use crate::error::{Error, Result};
use crate::math::{so3_exp, RngStream, Vec3};
use crate::reference::{quadrotor_reference, ReferenceSample, ReferenceSpec};

pub const STATE_DIM: usize = 26;
pub const ERROR_DIM: usize = 12;
pub const ACTION_DIM: usize = 4;
pub const HISTORY_ENTRY_DIM: usize = STATE_DIM + 6 + 6 + ACTION_DIM;
pub const PREVIEW_ENTRY_DIM: usize = 12;
/// Spacing between previewed reference samples (policy period).
pub const PREVIEW_DT: f64 = 0.01;

/// Clipped Gaussian sensor noise.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    pub sigma_x: f64,
    pub clip_x: f64,
    pub sigma_v: f64,
    pub clip_v: f64,
    pub sigma_theta: f64,
    pub clip_theta: f64,
    pub sigma_omega: f64,
    pub clip_omega: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        use std::f64::consts::PI;
        NoiseConfig {
            sigma_x: 0.01,
            clip_x: 0.0025,
            sigma_v: 0.02,
            clip_v: 0.005,
            sigma_theta: PI / 60.0,
            clip_theta: PI / 120.0,
            sigma_omega: PI / 30.0,
            clip_omega: PI / 60.0,
        }
    }
}

impl NoiseConfig {
    pub fn off() -> Self {
        NoiseConfig {
            sigma_x: 0.0,
            clip_x: 0.0,
            sigma_v: 0.0,
            clip_v: 0.0,
            sigma_theta: 0.0,
            clip_theta: 0.0,
            sigma_omega: 0.0,
            clip_omega: 0.0,
        }
    }

    pub fn is_off(&self) -> bool {
        self.sigma_x == 0.0 && self.sigma_v == 0.0 && self.sigma_theta == 0.0 && self.sigma_omega == 0.0
    }
}

fn clipped_noise(rng: &mut RngStream, sigma: f64, clip: f64) -> Vec3 {
    Vec3::from_fn(|_, _| (sigma * rng.normal()).clamp(-clip, clip))
}

/// Copy of `state` with clipped Gaussian noise on positions, velocities,
/// attitude (`R exp(eta)`) and body rates. The payload slot of a rigid
/// configuration keeps mirroring the quadrotor.
pub fn add_sensor_noise(state: &SystemState, cfg: &NoiseConfig, rng: &mut RngStream) -> SystemState {
    if cfg.is_off() {
        return *state;
    }
    let mut s = *state;
    s.quad.x += clipped_noise(rng, cfg.sigma_x, cfg.clip_x);
    s.quad.v += clipped_noise(rng, cfg.sigma_v, cfg.clip_v);
    let eta = clipped_noise(rng, cfg.sigma_theta, cfg.clip_theta);
    s.quad.rot = s.quad.rot.compose(&so3_exp(&eta));
    s.quad.omega += clipped_noise(rng, cfg.sigma_omega, cfg.clip_omega);
    let dx = clipped_noise(rng, cfg.sigma_x, cfg.clip_x);
    let dv = clipped_noise(rng, cfg.sigma_v, cfg.clip_v);
    if state.mode == crate::dynamics::CableMode::NoPayload {
        s.payload.x = s.quad.x;
        s.payload.v = s.quad.v;
    } else {
        s.payload.x += dx;
        s.payload.v += dv;
    }
    s
}

/// `[R^T e_xP, R^T e_vP, R^T e_xQ, R^T e_vQ]` with errors actual minus desired.
pub fn tracking_error(state: &SystemState, r: &ReferenceSample) -> [f64; ERROR_DIM] {
    let rot = &state.quad.rot;
    let parts = [
        rot.apply_inverse(&(state.payload.x - r.x_p)),
        rot.apply_inverse(&(state.payload.v - r.v_p)),
        rot.apply_inverse(&(state.quad.x - r.x_q)),
        rot.apply_inverse(&(state.quad.v - r.v_q)),
    ];
    let mut out = [0.0; ERROR_DIM];
    for (k, p) in parts.iter().enumerate() {
        out[3 * k..3 * k + 3].copy_from_slice(p.as_slice());
    }
    out
}

/// Observation settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationConfig {
    pub history: usize,
    pub preview: usize,
    pub pos_scale: f64,
    pub vel_scale: f64,
    /// Include `m_P` and `l` in the state block; zeroed otherwise.
    pub privileged: bool,
    /// Number of most recent history entries visible to the policy; older
    /// slots are zeroed. `None` shows all of them.
    pub visible_history: Option<usize>,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig {
            history: 5,
            preview: 5,
            pos_scale: 5.0,
            vel_scale: 5.0,
            privileged: true,
            visible_history: None,
        }
    }
}

impl ObservationConfig {
    pub fn layout(&self) -> ObservationLayout {
        ObservationLayout {
            history: self.history,
            preview: self.preview,
        }
    }
}

/// Block offsets of a flat observation vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObservationLayout {
    pub history: usize,
    pub preview: usize,
}

impl ObservationLayout {
    pub const PRESENT: usize = STATE_DIM + ERROR_DIM + ACTION_DIM;

    pub fn len(&self) -> usize {
        Self::PRESENT + self.history_len() + self.preview_len()
    }

    pub fn history_len(&self) -> usize {
        HISTORY_ENTRY_DIM * self.history
    }

    pub fn preview_len(&self) -> usize {
        PREVIEW_ENTRY_DIM * self.preview
    }

    pub fn present_range(&self) -> std::ops::Range<usize> {
        0..Self::PRESENT
    }

    pub fn history_range(&self) -> std::ops::Range<usize> {
        Self::PRESENT..Self::PRESENT + self.history_len()
    }

    pub fn preview_range(&self) -> std::ops::Range<usize> {
        let start = Self::PRESENT + self.history_len();
        start..start + self.preview_len()
    }
}

/// `[x_Q, R (row-major), x_P, v_Q, Omega, v_P, m_P, l]`, positions and
/// velocities divided by their scales.
pub fn normalized_state(state: &SystemState, params: &SystemParams, cfg: &ObservationConfig) -> [f64; STATE_DIM] {
    let mut out = [0.0; STATE_DIM];
    let px = 1.0 / cfg.pos_scale;
    let pv = 1.0 / cfg.vel_scale;
    out[0..3].copy_from_slice((state.quad.x * px).as_slice());
    out[3..12].copy_from_slice(&state.quad.rot.to_row_major());
    out[12..15].copy_from_slice((state.payload.x * px).as_slice());
    out[15..18].copy_from_slice((state.quad.v * pv).as_slice());
    out[18..21].copy_from_slice(state.quad.omega.as_slice());
    out[21..24].copy_from_slice((state.payload.v * pv).as_slice());
    if cfg.privileged {
        out[24] = params.m_p;
        out[25] = params.cable_length;
    }
    out
}

/// Fixed-capacity buffer of past `(state, reference, action)` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryBuffer {
    capacity: usize,
    entries: VecDeque<[f64; HISTORY_ENTRY_DIM]>,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        HistoryBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Appends the newest entry, evicting the oldest when full.
    pub fn push(&mut self, entry: [f64; HISTORY_ENTRY_DIM]) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    /// Entry `k` steps back (0 is the newest).
    pub fn get(&self, k: usize) -> Option<&[f64; HISTORY_ENTRY_DIM]> {
        self.entries.len().checked_sub(k + 1).map(|i| &self.entries[i])
    }

    /// Flattened oldest first and zero-padded at the front to the full
    /// capacity; only the `visible` most recent entries are written.
    pub fn write_flat(&self, out: &mut [f64], visible: usize) {
        out.fill(0.0);
        let n = self.entries.len();
        let pad = self.capacity - n;
        for (i, e) in self.entries.iter().enumerate() {
            let age = n - 1 - i;
            if age < visible {
                let slot = pad + i;
                out[slot * HISTORY_ENTRY_DIM..(slot + 1) * HISTORY_ENTRY_DIM].copy_from_slice(e);
            }
        }
    }
}

/// History entry for the state and reference at one policy step together
/// with the action that was applied before it.
pub fn history_entry(
    state: &SystemState,
    r: &ReferenceSample,
    a_prev: &Action,
    params: &SystemParams,
    cfg: &ObservationConfig,
) -> [f64; HISTORY_ENTRY_DIM] {
    let mut e = [0.0; HISTORY_ENTRY_DIM];
    e[..STATE_DIM].copy_from_slice(&normalized_state(state, params, cfg));
    let px = 1.0 / cfg.pos_scale;
    let pv = 1.0 / cfg.vel_scale;
    let refs = [r.x_q * px, r.x_p * px, r.v_q * pv, r.v_p * pv];
    for (k, v) in refs.iter().enumerate() {
        let o = STATE_DIM + 3 * k;
        e[o..o + 3].copy_from_slice(v.as_slice());
    }
    e[STATE_DIM + 12..].copy_from_slice(&a_prev.to_array());
    e
}

/// Builds the observation for the (already noisy) `state` at time `t`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_observation(
    noisy: &SystemState,
    spec: &ReferenceSpec,
    t: f64,
    hist: &HistoryBuffer,
    a_prev: &Action,
    params: &SystemParams,
    cfg: &ObservationConfig,
    out: &mut Vec<f64>,
) -> Result<()> {
    let layout = cfg.layout();
    if hist.capacity() != cfg.history {
        return Err(Error::Layout {
            expected: cfg.history,
            got: hist.capacity(),
        });
    }
    out.clear();
    out.resize(layout.len(), 0.0);
    let l = params.cable_length;
    let r = quadrotor_reference(t, spec, l)?;
    out[..STATE_DIM].copy_from_slice(&normalized_state(noisy, params, cfg));
    out[STATE_DIM..STATE_DIM + ERROR_DIM].copy_from_slice(&tracking_error(noisy, &r));
    out[STATE_DIM + ERROR_DIM..ObservationLayout::PRESENT].copy_from_slice(&a_prev.to_array());

    let visible = cfg.visible_history.unwrap_or(cfg.history).min(cfg.history);
    hist.write_flat(&mut out[layout.history_range()], visible);

    let rot = &noisy.quad.rot;
    let f = cfg.preview;
    let base = layout.preview_range().start;
    for k in 0..f {
        let rk = quadrotor_reference(t + (k + 1) as f64 * PREVIEW_DT, spec, l)?;
        let diffs = [
            noisy.payload.x - rk.x_p,
            noisy.payload.v - rk.v_p,
            noisy.quad.x - rk.x_q,
            noisy.quad.v - rk.v_q,
        ];
        for (g, d) in diffs.iter().enumerate() {
            let o = base + g * 3 * f + 3 * k;
            out[o..o + 3].copy_from_slice(rot.apply_inverse(d).as_slice());
        }
    }
    if out.len() != layout.len() {
        return Err(Error::Layout {
            expected: layout.len(),
            got: out.len(),
        });
    }
    Ok(())
}
