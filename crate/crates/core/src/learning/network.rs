//! Actor-critic MLP with history and preview encoders and hand-written
//! reverse-mode gradients.
//!
//! Parameters live in one flat `Vec<f64>`. Each dense layer stores its
//! weight as a row-major `fan_in x fan_out` block followed by its bias, so a
//! batch forward pass is `Y = X W + b` with `X` row-major `batch x fan_in`.

use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::sensing::ObservationLayout;

/// Network shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub present: usize,
    pub hist_in: usize,
    pub prev_in: usize,
    pub enc_hist: usize,
    pub enc_prev: usize,
    pub hidden: Vec<usize>,
    pub act_dim: usize,
}

impl NetworkSpec {
    /// Default widths for an observation layout: history encoder to 64,
    /// preview encoder to 32, two 256-unit hidden layers per head.
    pub fn for_layout(layout: &ObservationLayout) -> Self {
        NetworkSpec {
            present: ObservationLayout::PRESENT,
            hist_in: layout.history_len(),
            prev_in: layout.preview_len(),
            enc_hist: 64,
            enc_prev: 32,
            hidden: vec![256, 256],
            act_dim: 4,
        }
    }

    pub fn obs_len(&self) -> usize {
        self.present + self.hist_in + self.prev_in
    }

    fn hist_emb(&self) -> usize {
        if self.hist_in > 0 {
            self.enc_hist
        } else {
            0
        }
    }

    fn prev_emb(&self) -> usize {
        if self.prev_in > 0 {
            self.enc_prev
        } else {
            0
        }
    }

    pub fn trunk_in(&self) -> usize {
        self.present + self.hist_emb() + self.prev_emb()
    }

    /// One-line textual form used in checkpoint manifests.
    pub fn to_line(&self) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        format!(
            "spec present={} hist_in={} prev_in={} enc_hist={} enc_prev={} hidden={} act={}",
            self.present,
            self.hist_in,
            self.prev_in,
            self.enc_hist,
            self.enc_prev,
            hidden.join(","),
            self.act_dim
        )
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let bad = || Error::Checkpoint(format!("malformed spec line `{line}`"));
        let mut it = line.split_whitespace();
        if it.next() != Some("spec") {
            return Err(bad());
        }
        let mut spec = NetworkSpec {
            present: 0,
            hist_in: 0,
            prev_in: 0,
            enc_hist: 0,
            enc_prev: 0,
            hidden: Vec::new(),
            act_dim: 0,
        };
        for kv in it {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
            match k {
                "present" => spec.present = num(v)?,
                "hist_in" => spec.hist_in = num(v)?,
                "prev_in" => spec.prev_in = num(v)?,
                "enc_hist" => spec.enc_hist = num(v)?,
                "enc_prev" => spec.enc_prev = num(v)?,
                "act" => spec.act_dim = num(v)?,
                "hidden" => {
                    spec.hidden = v.split(',').map(num).collect::<Result<_>>()?;
                }
                _ => return Err(bad()),
            }
        }
        Ok(spec)
    }
}

/// Dense layer location inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dense {
    pub name: String,
    pub fan_in: usize,
    pub fan_out: usize,
    pub w: usize,
    pub b: usize,
}

impl Dense {
    fn end(&self) -> usize {
        self.b + self.fan_out
    }
}

/// Manifest line: a named block of the parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

/// Parameter layout for a [`NetworkSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub enc_hist: Option<Dense>,
    pub enc_prev: Option<Dense>,
    pub actor: Vec<Dense>,
    pub critic: Vec<Dense>,
    pub log_std: usize,
    pub n_params: usize,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Self {
        let mut off = 0;
        let mut dense = |name: String, fan_in: usize, fan_out: usize| {
            let d = Dense {
                name,
                fan_in,
                fan_out,
                w: off,
                b: off + fan_in * fan_out,
            };
            off = d.end();
            d
        };
        let enc_hist = (spec.hist_in > 0).then(|| dense("enc_hist".into(), spec.hist_in, spec.enc_hist));
        let enc_prev = (spec.prev_in > 0).then(|| dense("enc_prev".into(), spec.prev_in, spec.enc_prev));
        let mut head = |prefix: &str, out: usize| {
            let mut layers = Vec::new();
            let mut width = spec.trunk_in();
            for (i, &h) in spec.hidden.iter().enumerate() {
                layers.push(dense(format!("{prefix}.{i}"), width, h));
                width = h;
            }
            layers.push(dense(format!("{prefix}.out"), width, out));
            layers
        };
        let actor = head("actor", spec.act_dim);
        let critic = head("critic", 1);
        let log_std = off;
        let n_params = off + spec.act_dim;
        Network {
            spec,
            enc_hist,
            enc_prev,
            actor,
            critic,
            log_std,
            n_params,
        }
    }

    fn dense_layers(&self) -> impl Iterator<Item = &Dense> {
        self.enc_hist
            .iter()
            .chain(self.enc_prev.iter())
            .chain(self.actor.iter())
            .chain(self.critic.iter())
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        let mut out = Vec::new();
        for d in self.dense_layers() {
            out.push(ManifestEntry {
                name: format!("{}.weight", d.name),
                rows: d.fan_in,
                cols: d.fan_out,
                offset: d.w,
            });
            out.push(ManifestEntry {
                name: format!("{}.bias", d.name),
                rows: 1,
                cols: d.fan_out,
                offset: d.b,
            });
        }
        out.push(ManifestEntry {
            name: "log_std".into(),
            rows: 1,
            cols: self.spec.act_dim,
            offset: self.log_std,
        });
        out
    }

    /// Uniform fan-in initialisation; the actor output layer is scaled
    /// down so initial actions stay near zero. Biases start at zero.
    pub fn init_params(&self, rng: &mut RngStream, log_std: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.n_params];
        for d in self.dense_layers() {
            let mut bound = (6.0 / (d.fan_in + d.fan_out) as f64).sqrt();
            if d.name == "actor.out" {
                bound *= 0.01;
            }
            for w in &mut p[d.w..d.b] {
                *w = rng.uniform(-bound, bound);
            }
        }
        p[self.log_std..].fill(log_std);
        p
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
pub fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
pub fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// `C = alpha A B + beta C` on strided row-major views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || (a.len() > (m - 1) * rsa + (k - 1) * csa && b.len() > (k - 1) * rsb + (n - 1) * csb));
    assert!(c.len() >= m * n);
    if m == 1 && csb == 1 {
        // single-row product: row axpys vectorise far better than the
        // packed kernel at this size
        let c = &mut c[..n];
        if beta == 0.0 {
            c.fill(0.0);
        } else if beta != 1.0 {
            c.iter_mut().for_each(|v| *v *= beta);
        }
        for p in 0..k {
            let s = a[p * csa];
            let row = &b[p * rsb..p * rsb + n];
            for (ci, bi) in c.iter_mut().zip(row) {
                *ci += s * bi;
            }
        }
        return;
    }
    // SAFETY: the assertions above keep every strided access in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Activations of one batch, kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    pub batch: usize,
    present: Vec<f64>,
    hist_x: Vec<f64>,
    prev_x: Vec<f64>,
    hist_z: Vec<f64>,
    prev_z: Vec<f64>,
    trunk: Vec<f64>,
    actor_z: Vec<Vec<f64>>,
    critic_z: Vec<Vec<f64>>,
    actor_a: Vec<Vec<f64>>,
    critic_a: Vec<Vec<f64>>,
    /// Pre-squash action means, `batch x act_dim`.
    pub mean: Vec<f64>,
    pub value: Vec<f64>,
}

fn dense_forward(d: &Dense, params: &[f64], x: &[f64], batch: usize, z: &mut Vec<f64>) {
    z.clear();
    z.resize(batch * d.fan_out, 0.0);
    let bias = &params[d.b..d.b + d.fan_out];
    for row in z.chunks_mut(d.fan_out) {
        row.copy_from_slice(bias);
    }
    gemm(
        batch,
        d.fan_in,
        d.fan_out,
        x,
        (d.fan_in, 1),
        &params[d.w..d.b],
        (d.fan_out, 1),
        1.0,
        z,
    );
}

/// Accumulates `dW += X^T dY`, `db += sum(dY)`; writes `dX = dY W^T` when
/// requested.
fn dense_backward(d: &Dense, params: &[f64], x: &[f64], dy: &[f64], batch: usize, grad: &mut [f64], dx: Option<&mut Vec<f64>>) {
    gemm(
        d.fan_in,
        batch,
        d.fan_out,
        x,
        (1, d.fan_in),
        dy,
        (d.fan_out, 1),
        1.0,
        &mut grad[d.w..d.b],
    );
    let gb = &mut grad[d.b..d.b + d.fan_out];
    for row in dy.chunks(d.fan_out) {
        for (g, v) in gb.iter_mut().zip(row) {
            *g += v;
        }
    }
    if let Some(dx) = dx {
        dx.clear();
        dx.resize(batch * d.fan_in, 0.0);
        gemm(
            batch,
            d.fan_out,
            d.fan_in,
            dy,
            (d.fan_out, 1),
            &params[d.w..d.b],
            (1, d.fan_out),
            0.0,
            dx,
        );
    }
}

impl Network {
    /// Forward pass over a batch of observations (row-major, one per row).
    pub fn forward(&self, params: &[f64], obs: &[f64], batch: usize, cache: &mut ForwardCache) -> Result<()> {
        let s = &self.spec;
        let n_obs = s.obs_len();
        if params.len() != self.n_params {
            return Err(Error::Dimension(format!("{} parameters, expected {}", params.len(), self.n_params)));
        }
        if obs.len() != batch * n_obs {
            return Err(Error::Dimension(format!(
                "observation batch of {} values, expected {batch} x {n_obs}",
                obs.len()
            )));
        }
        cache.batch = batch;
        let split = |buf: &mut Vec<f64>, lo: usize, hi: usize| {
            buf.clear();
            for row in obs.chunks(n_obs) {
                buf.extend_from_slice(&row[lo..hi]);
            }
        };
        split(&mut cache.present, 0, s.present);
        split(&mut cache.hist_x, s.present, s.present + s.hist_in);
        split(&mut cache.prev_x, s.present + s.hist_in, n_obs);

        let t_in = s.trunk_in();
        cache.trunk.clear();
        cache.trunk.resize(batch * t_in, 0.0);
        for b in 0..batch {
            cache.trunk[b * t_in..b * t_in + s.present]
                .copy_from_slice(&cache.present[b * s.present..(b + 1) * s.present]);
        }
        let mut col = s.present;
        if let Some(d) = &self.enc_hist {
            dense_forward(d, params, &cache.hist_x, batch, &mut cache.hist_z);
            for b in 0..batch {
                for j in 0..d.fan_out {
                    cache.trunk[b * t_in + col + j] = silu(cache.hist_z[b * d.fan_out + j]);
                }
            }
            col += d.fan_out;
        }
        if let Some(d) = &self.enc_prev {
            dense_forward(d, params, &cache.prev_x, batch, &mut cache.prev_z);
            for b in 0..batch {
                for j in 0..d.fan_out {
                    cache.trunk[b * t_in + col + j] = silu(cache.prev_z[b * d.fan_out + j]);
                }
            }
        }

        let run_head = |layers: &[Dense], trunk: &[f64], zs: &mut Vec<Vec<f64>>, acts: &mut Vec<Vec<f64>>| {
            zs.resize(layers.len(), Vec::new());
            acts.resize(layers.len().saturating_sub(1), Vec::new());
            for (i, d) in layers.iter().enumerate() {
                let x: &[f64] = if i == 0 { trunk } else { &acts[i - 1] };
                let mut z = std::mem::take(&mut zs[i]);
                dense_forward(d, params, x, batch, &mut z);
                if i + 1 < layers.len() {
                    let a = &mut acts[i];
                    a.clear();
                    a.extend(z.iter().map(|&v| silu(v)));
                }
                zs[i] = z;
            }
        };
        run_head(&self.actor, &cache.trunk, &mut cache.actor_z, &mut cache.actor_a);
        run_head(&self.critic, &cache.trunk, &mut cache.critic_z, &mut cache.critic_a);
        cache.mean.clone_from(cache.actor_z.last().unwrap());
        cache.value.clone_from(cache.critic_z.last().unwrap());
        Ok(())
    }

    /// Accumulates parameter gradients into `grad` given upstream gradients
    /// of a scalar loss with respect to the pre-squash means (`batch x
    /// act_dim`), the values (`batch`) and the log-std vector.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &ForwardCache,
        d_mean: &[f64],
        d_value: &[f64],
        d_log_std: &[f64],
        grad: &mut [f64],
    ) {
        let s = &self.spec;
        let batch = cache.batch;
        let t_in = s.trunk_in();
        let mut d_trunk = vec![0.0; batch * t_in];

        let mut back_head = |layers: &[Dense], zs: &[Vec<f64>], acts: &[Vec<f64>], d_out: &[f64], grad: &mut [f64]| {
            let mut dy = d_out.to_vec();
            let mut dx = Vec::new();
            for i in (0..layers.len()).rev() {
                let x: &[f64] = if i == 0 { &cache.trunk } else { &acts[i - 1] };
                dense_backward(&layers[i], params, x, &dy, batch, grad, Some(&mut dx));
                if i == 0 {
                    for (a, b) in d_trunk.iter_mut().zip(&dx) {
                        *a += b;
                    }
                } else {
                    for (v, z) in dx.iter_mut().zip(&zs[i - 1]) {
                        *v *= silu_grad(*z);
                    }
                    std::mem::swap(&mut dy, &mut dx);
                }
            }
        };
        back_head(&self.actor, &cache.actor_z, &cache.actor_a, d_mean, grad);
        back_head(&self.critic, &cache.critic_z, &cache.critic_a, d_value, grad);

        let mut col = s.present;
        let encoder = |d: &Dense, x: &[f64], z: &[f64], col: usize, grad: &mut [f64]| {
            let mut dz = vec![0.0; batch * d.fan_out];
            for b in 0..batch {
                for j in 0..d.fan_out {
                    dz[b * d.fan_out + j] = d_trunk[b * t_in + col + j] * silu_grad(z[b * d.fan_out + j]);
                }
            }
            dense_backward(d, params, x, &dz, batch, grad, None);
        };
        if let Some(d) = &self.enc_hist {
            encoder(d, &cache.hist_x, &cache.hist_z, col, grad);
            col += d.fan_out;
        }
        if let Some(d) = &self.enc_prev {
            encoder(d, &cache.prev_x, &cache.prev_z, col, grad);
        }
        for (g, v) in grad[self.log_std..].iter_mut().zip(d_log_std) {
            *g += v;
        }
    }
}
