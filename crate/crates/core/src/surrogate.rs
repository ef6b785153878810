//! The gradient network g_θ: ℝⁿ → ℝⁿ, its analytic Jacobian, and the
//! four Taylor-residual losses with training.
//!
//! The residual for a pair (x_i, x_j) with τ = x_j - x_i is
//!
//! ```text
//! r = y_i - y_j + g(x_i)ᵀτ            (first order)
//!   + ½ τᵀ J_g(x_i) τ                 (second-order variants)
//! ```
//!
//! and the training objective is Σ c_b r_b², with c_b the evolutionary
//! weight for the weighted variants and 1/batch otherwise. The Jacobian
//! contribution is computed as a single Jacobian-vector product J·τ in
//! forward mode, never as a full matrix. With `jacobian_attached = false`
//! (the default) the J·τ value enters the residual but is held constant
//! during parameter-gradient computation, which removes all second-order
//! backpropagation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Egl,
    EvoGrad,
    HGrad,
    EvoGrad2,
}

impl Variant {
    /// Does the residual carry the ½τᵀJτ correction?
    pub fn second_order(self) -> bool {
        matches!(self, Variant::HGrad | Variant::EvoGrad2)
    }

    /// Does the loss use evolutionary importance weights?
    pub fn weighted(self) -> bool {
        matches!(self, Variant::EvoGrad | Variant::EvoGrad2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Egl => "egl",
            Variant::EvoGrad => "evograd",
            Variant::HGrad => "hgrad",
            Variant::EvoGrad2 => "evograd2",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainOpt {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossConfig {
    pub variant: Variant,
    pub jacobian_attached: bool,
    pub batch_size: usize,
    pub learn_rate: f64,
    pub optimizer: TrainOpt,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            variant: Variant::EvoGrad2,
            jacobian_attached: false,
            batch_size: 64,
            learn_rate: 0.001,
            optimizer: TrainOpt::Adam,
        }
    }
}

/// One oriented training pair in normalized coordinates.
#[derive(Debug, Clone)]
pub struct TaylorPair {
    pub anchor: Vector,
    pub probe: Vector,
    pub y_anchor: f64,
    pub y_probe: f64,
    pub weight: f64,
}

/// tanh via the classic rational-minimax split: an odd polynomial below
/// 0.625, `1 - 2/(e^{2x}+1)` above. Within ~2 ulp of libm but several times
/// faster, because the libm route goes through the old `expm1` kernel. The
/// activation and its derivative `1 - tanh²` must come from the same
/// function everywhere, or the finite-difference checks drift.
#[inline]
fn act_tanh(x: f64) -> f64 {
    const SATURATION: f64 = 19.061_547_465_398_49; // 0.5 * ln(2^55)
    let ax = x.abs();
    if ax >= 0.625 {
        if ax > SATURATION {
            if x.is_nan() {
                return x;
            }
            return 1.0f64.copysign(x);
        }
        let e = (2.0 * ax).exp();
        return (1.0 - 2.0 / (e + 1.0)).copysign(x);
    }
    if ax < 1e-300 {
        return x;
    }
    let z = x * x;
    let p = (-0.964_399_179_425_052_238_628 * z - 99.287_723_100_191_858_656_4) * z
        - 1_614.687_684_417_084_479_52;
    let q = ((z + 112.811_678_491_632_931_402) * z + 2_235.488_390_601_004_485_83) * z
        + 4_844.063_053_251_254_860_48;
    x + x * z * (p / q)
}

/// Feed-forward network with tanh hidden layers and a linear output layer.
/// Input and output dimensions are equal; the default hidden stack is
/// 10-15-10.
#[derive(Debug, Clone)]
pub struct GradNet {
    sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vector>,
}

pub const DEFAULT_HIDDEN: [usize; 3] = [10, 15, 10];

/// Flat parameter dump with the layer sizes needed to rebuild it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl GradNet {
    /// Fresh net with scaled-uniform fan-in initialization.
    pub fn new(dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(dim);
        sizes.extend_from_slice(hidden);
        sizes.push(dim);

        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let fan_in = sizes[l] as f64;
            let bound = 1.0 / fan_in.sqrt();
            weights.push(Matrix::from_fn(sizes[l + 1], sizes[l], |_, _| {
                rng.uniform_in(-bound, bound)
            }));
            biases.push(Vector::from_fn(sizes[l + 1], |_, _| {
                rng.uniform_in(-bound, bound)
            }));
        }
        Self {
            sizes,
            weights,
            biases,
        }
    }

    pub fn new_default(dim: usize, rng: &mut Rng) -> Self {
        Self::new(dim, &DEFAULT_HIDDEN, rng)
    }

    /// Build from explicit layer parameters; `weights[l]` must be
    /// `sizes[l+1] x sizes[l]`.
    pub fn from_parts(weights: Vec<Matrix>, biases: Vec<Vector>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Config("layer parameter lists are inconsistent".into()));
        }
        let mut sizes = vec![weights[0].ncols()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.ncols() != *sizes.last().unwrap() || w.nrows() != b.len() {
                return Err(Error::Config("layer shapes do not chain".into()));
            }
            sizes.push(w.nrows());
        }
        Ok(Self {
            sizes,
            weights,
            biases,
        })
    }

    pub fn dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = flat[k];
                k += 1;
            }
            for v in b.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
    }

    pub fn checkpoint(&self) -> NetCheckpoint {
        NetCheckpoint {
            sizes: self.sizes.clone(),
            params: self.params_flat(),
        }
    }

    pub fn from_checkpoint(ck: &NetCheckpoint) -> Result<Self> {
        if ck.sizes.len() < 2 {
            return Err(Error::Config("checkpoint needs at least two layer sizes".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..ck.sizes.len() - 1 {
            weights.push(Matrix::zeros(ck.sizes[l + 1], ck.sizes[l]));
            biases.push(Vector::zeros(ck.sizes[l + 1]));
        }
        let mut net = Self {
            sizes: ck.sizes.clone(),
            weights,
            biases,
        };
        if ck.params.len() != net.num_params() {
            return Err(Error::Config("checkpoint parameter count mismatch".into()));
        }
        net.set_params_flat(&ck.params);
        Ok(net)
    }

    /// g_θ(x).
    pub fn forward(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.dim(), "dimension mismatch in forward");
        let mut a = x.clone();
        for l in 0..self.layers() {
            let mut z = &self.weights[l] * a + &self.biases[l];
            if l + 1 < self.layers() {
                z.apply(|v| *v = act_tanh(*v));
            }
            a = z;
        }
        a
    }

    /// g_θ(x) together with J_{g_θ}(x)·t, one forward-mode pass.
    pub fn jacobian_vector_product(&self, x: &Vector, t: &Vector) -> (Vector, Vector) {
        let mut a = x.clone();
        let mut s = t.clone();
        for l in 0..self.layers() {
            let mut z = &self.weights[l] * a + &self.biases[l];
            let mut u = &self.weights[l] * s;
            if l + 1 < self.layers() {
                z.apply(|v| *v = act_tanh(*v));
                for i in 0..u.len() {
                    u[i] *= 1.0 - z[i] * z[i];
                }
            }
            a = z;
            s = u;
        }
        (a, s)
    }

    /// Full Jacobian by forward-mode accumulation of n tangent columns.
    pub fn jacobian(&self, x: &Vector) -> Matrix {
        let n = self.dim();
        let mut a = x.clone();
        let mut tan = Matrix::identity(n, n);
        for l in 0..self.layers() {
            let mut z = &self.weights[l] * a + &self.biases[l];
            let mut s = &self.weights[l] * tan;
            if l + 1 < self.layers() {
                z.apply(|v| *v = act_tanh(*v));
                for i in 0..s.nrows() {
                    let d = 1.0 - z[i] * z[i];
                    for j in 0..s.ncols() {
                        s[(i, j)] *= d;
                    }
                }
            }
            a = z;
            tan = s;
        }
        tan
    }
}

/// Taylor residual of a single pair under the given variant. Only the
/// symmetric part of J contributes to τᵀJτ, by the identity
/// τᵀJτ = τᵀ((J+Jᵀ)/2)τ; no explicit symmetrization is needed.
pub fn residual(variant: Variant, net: &GradNet, pair: &TaylorPair) -> f64 {
    let tau = &pair.probe - &pair.anchor;
    let dy = pair.y_anchor - pair.y_probe;
    if variant.second_order() {
        let (g, jt) = net.jacobian_vector_product(&pair.anchor, &tau);
        dy + g.dot(&tau) + 0.5 * tau.dot(&jt)
    } else {
        dy + net.forward(&pair.anchor).dot(&tau)
    }
}

/// Loss of a batch: Σ w_b r_b² for the weighted variants, mean(r²) otherwise.
pub fn batch_loss(variant: Variant, net: &GradNet, pairs: &[TaylorPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let uniform = 1.0 / pairs.len() as f64;
    let mut total = 0.0;
    let mut idxs: Vec<usize> = Vec::with_capacity(512);
    let mut start = 0;
    while start < pairs.len() {
        let end = (start + 512).min(pairs.len());
        idxs.clear();
        idxs.extend(start..end);
        let tape = batch_forward(net, pairs, &idxs, variant.second_order());
        for (k, &i) in idxs.iter().enumerate() {
            let c = if variant.weighted() { pairs[i].weight } else { uniform };
            total += c * tape.r[k] * tape.r[k];
        }
        start = end;
    }
    total
}

#[derive(Debug, Clone)]
pub struct GradBuffers {
    pub d_weights: Vec<Matrix>,
    pub d_biases: Vec<Vector>,
}

impl GradBuffers {
    fn zeros_like(net: &GradNet) -> Self {
        Self {
            d_weights: net.weights.iter().map(|w| Matrix::zeros(w.nrows(), w.ncols())).collect(),
            d_biases: net.biases.iter().map(|b| Vector::zeros(b.len())).collect(),
        }
    }
}

// The layer matrices here are tiny (tens of rows) while batches are wide, so
// generic BLAS-style packing costs more than it saves. These flat column-major
// kernels beat it comfortably at this scale.

/// out(m×n) += a(m×k) · b(k×n), column-major slices.
fn gemm_nn_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for col in 0..n {
        let bcol = &b[col * k..(col + 1) * k];
        let ocol = &mut out[col * m..(col + 1) * m];
        for (kk, &bv) in bcol.iter().enumerate() {
            let acol = &a[kk * m..(kk + 1) * m];
            for i in 0..m {
                ocol[i] += bv * acol[i];
            }
        }
    }
}

/// out(m×k) += a(m×n) · b(k×n)ᵀ, column-major slices.
fn gemm_nt_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for col in 0..n {
        let acol = &a[col * m..(col + 1) * m];
        let bcol = &b[col * k..(col + 1) * k];
        for (j, &bv) in bcol.iter().enumerate() {
            let ocol = &mut out[j * m..(j + 1) * m];
            for i in 0..m {
                ocol[i] += bv * acol[i];
            }
        }
    }
}

/// out(k×n) = a(m×k)ᵀ · b(m×n), column-major slices.
fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for col in 0..n {
        let bcol = &b[col * m..(col + 1) * m];
        let ocol = &mut out[col * k..(col + 1) * k];
        for (j, o) in ocol.iter_mut().enumerate() {
            let acol = &a[j * m..(j + 1) * m];
            let mut acc = 0.0;
            for i in 0..m {
                acc += acol[i] * bcol[i];
            }
            *o = acc;
        }
    }
}

fn fill_bias_cols(bias: &Vector, cols: usize, out: &mut [f64]) {
    let m = bias.len();
    let b = bias.as_slice();
    for col in 0..cols {
        out[col * m..(col + 1) * m].copy_from_slice(b);
    }
}

/// Activations, tangent streams, displacements, and residuals of one batch.
struct BatchTape {
    acts: Vec<Matrix>,
    tangents: Vec<Matrix>,
    pre_tangents: Vec<Matrix>,
    tau: Matrix,
    r: Vector,
}

fn batch_forward(net: &GradNet, pairs: &[TaylorPair], idxs: &[usize], second: bool) -> BatchTape {
    let n = net.dim();
    let batch = idxs.len();
    let layers = net.layers();

    let x = Matrix::from_fn(n, batch, |i, b| pairs[idxs[b]].anchor[i]);
    let tau = Matrix::from_fn(n, batch, |i, b| {
        let p = &pairs[idxs[b]];
        p.probe[i] - p.anchor[i]
    });

    let mut acts: Vec<Matrix> = Vec::with_capacity(layers + 1);
    acts.push(x);
    let mut tangents: Vec<Matrix> = Vec::with_capacity(layers + 1);
    let mut pre_tangents: Vec<Matrix> = Vec::with_capacity(layers);
    if second {
        tangents.push(tau.clone());
    }
    for l in 0..layers {
        let (rows, cols) = (net.weights[l].nrows(), net.weights[l].ncols());
        let w = net.weights[l].as_slice();
        let hidden = l + 1 < layers;

        let mut z = Matrix::zeros(rows, batch);
        fill_bias_cols(&net.biases[l], batch, z.as_mut_slice());
        gemm_nn_acc(rows, cols, batch, w, acts[l].as_slice(), z.as_mut_slice());
        if hidden {
            for v in z.as_mut_slice() {
                *v = act_tanh(*v);
            }
        }
        if second {
            let mut s = Matrix::zeros(rows, batch);
            gemm_nn_acc(rows, cols, batch, w, tangents[l].as_slice(), s.as_mut_slice());
            let t = if hidden {
                let mut t = s.clone();
                for (tv, zv) in t.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    *tv *= 1.0 - zv * zv;
                }
                t
            } else {
                s.clone()
            };
            pre_tangents.push(s);
            tangents.push(t);
        }
        acts.push(z);
    }

    let g = acts[layers].as_slice();
    let tau_s = tau.as_slice();
    let mut r = Vector::zeros(batch);
    for b in 0..batch {
        let p = &pairs[idxs[b]];
        let gcol = &g[b * n..(b + 1) * n];
        let tcol = &tau_s[b * n..(b + 1) * n];
        let mut lin = p.y_anchor - p.y_probe;
        for i in 0..n {
            lin += gcol[i] * tcol[i];
        }
        if second {
            let u = tangents[layers].as_slice();
            let ucol = &u[b * n..(b + 1) * n];
            let mut quad = 0.0;
            for i in 0..n {
                quad += tcol[i] * ucol[i];
            }
            lin += 0.5 * quad;
        }
        r[b] = lin;
    }
    BatchTape {
        acts,
        tangents,
        pre_tangents,
        tau,
        r,
    }
}

/// Batched loss and parameter gradient.
///
/// `coeffs[b]` multiplies r_b² in the loss. When `attached` is false the
/// tangent stream that produces J·τ is excluded from the backward pass.
pub fn loss_and_grad(
    variant: Variant,
    attached: bool,
    net: &GradNet,
    pairs: &[TaylorPair],
    coeffs: &[f64],
) -> (f64, GradBuffers) {
    let idxs: Vec<usize> = (0..pairs.len()).collect();
    loss_and_grad_indexed(variant, attached, net, pairs, &idxs, coeffs)
}

fn loss_and_grad_indexed(
    variant: Variant,
    attached: bool,
    net: &GradNet,
    pairs: &[TaylorPair],
    idxs: &[usize],
    coeffs: &[f64],
) -> (f64, GradBuffers) {
    let n = net.dim();
    let batch = idxs.len();
    assert_eq!(coeffs.len(), batch);
    let layers = net.layers();
    let second = variant.second_order();

    let BatchTape {
        acts,
        tangents,
        pre_tangents,
        tau,
        r,
    } = batch_forward(net, pairs, idxs, second);

    let loss: f64 = (0..batch).map(|b| coeffs[b] * r[b] * r[b]).sum();

    // Seed cotangents: dL/dG = 2 c r ⊙ τ, dL/dU = c r ⊙ τ (attached only).
    let mut delta_a = tau.clone();
    {
        let da = delta_a.as_mut_slice();
        for b in 0..batch {
            let f = 2.0 * coeffs[b] * r[b];
            for v in &mut da[b * n..(b + 1) * n] {
                *v *= f;
            }
        }
    }
    let track_tangent = second && attached;
    let mut delta_t = if track_tangent {
        let mut m = tau.clone();
        let ms = m.as_mut_slice();
        for b in 0..batch {
            let f = coeffs[b] * r[b];
            for v in &mut ms[b * n..(b + 1) * n] {
                *v *= f;
            }
        }
        Some(m)
    } else {
        None
    };

    let mut grads = GradBuffers::zeros_like(net);
    for l in (0..layers).rev() {
        let hidden = l + 1 < layers;
        let (delta_z, delta_s) = if hidden {
            let a_next = acts[l + 1].as_slice();
            let mut dz = delta_a;
            match (&delta_t, track_tangent) {
                (Some(dt), true) => {
                    let s = pre_tangents[l].as_slice();
                    let dts = dt.as_slice();
                    {
                        let dzs = dz.as_mut_slice();
                        for i in 0..dzs.len() {
                            let av = a_next[i];
                            let d = 1.0 - av * av;
                            dzs[i] = d * dzs[i] - 2.0 * av * d * s[i] * dts[i];
                        }
                    }
                    let mut ds = dt.clone();
                    for (dv, &av) in ds.as_mut_slice().iter_mut().zip(a_next) {
                        *dv *= 1.0 - av * av;
                    }
                    (dz, Some(ds))
                }
                _ => {
                    for (dv, &av) in dz.as_mut_slice().iter_mut().zip(a_next) {
                        *dv *= 1.0 - av * av;
                    }
                    (dz, None)
                }
            }
        } else {
            (delta_a, delta_t.take())
        };

        let rows = net.weights[l].nrows();
        let cols = net.weights[l].ncols();
        gemm_nt_acc(
            rows,
            cols,
            batch,
            delta_z.as_slice(),
            acts[l].as_slice(),
            grads.d_weights[l].as_mut_slice(),
        );
        if let Some(ds) = &delta_s {
            gemm_nt_acc(
                rows,
                cols,
                batch,
                ds.as_slice(),
                tangents[l].as_slice(),
                grads.d_weights[l].as_mut_slice(),
            );
        }
        {
            let db = grads.d_biases[l].as_mut_slice();
            let dzs = delta_z.as_slice();
            for col in 0..batch {
                let dcol = &dzs[col * rows..(col + 1) * rows];
                for i in 0..rows {
                    db[i] += dcol[i];
                }
            }
        }

        if l > 0 {
            let w = net.weights[l].as_slice();
            let mut da = Matrix::zeros(cols, batch);
            gemm_tn(rows, cols, batch, w, delta_z.as_slice(), da.as_mut_slice());
            delta_a = da;
            delta_t = delta_s.map(|ds| {
                let mut dt = Matrix::zeros(cols, batch);
                gemm_tn(rows, cols, batch, w, ds.as_slice(), dt.as_mut_slice());
                dt
            });
        } else {
            delta_a = delta_z;
            delta_t = delta_s;
        }
    }

    (loss, grads)
}

/// Per-parameter moment state for the adaptive training optimizer.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_w: Vec<Matrix>,
    v_w: Vec<Matrix>,
    m_b: Vec<Vector>,
    v_b: Vec<Vector>,
    t: u64,
    pub lr: f64,
    pub optimizer: TrainOpt,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(net: &GradNet, lr: f64, optimizer: TrainOpt) -> Self {
        Self {
            m_w: net.weights.iter().map(|w| Matrix::zeros(w.nrows(), w.ncols())).collect(),
            v_w: net.weights.iter().map(|w| Matrix::zeros(w.nrows(), w.ncols())).collect(),
            m_b: net.biases.iter().map(|b| Vector::zeros(b.len())).collect(),
            v_b: net.biases.iter().map(|b| Vector::zeros(b.len())).collect(),
            t: 0,
            lr,
            optimizer,
        }
    }

    fn step(&mut self, net: &mut GradNet, grads: &GradBuffers) {
        match self.optimizer {
            TrainOpt::Sgd => {
                for l in 0..net.weights.len() {
                    net.weights[l] -= &grads.d_weights[l] * self.lr;
                    net.biases[l] -= &grads.d_biases[l] * self.lr;
                }
            }
            TrainOpt::Adam => {
                self.t += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
                for l in 0..net.weights.len() {
                    adam_update(
                        net.weights[l].as_mut_slice(),
                        grads.d_weights[l].as_slice(),
                        self.m_w[l].as_mut_slice(),
                        self.v_w[l].as_mut_slice(),
                        self.lr,
                        bc1,
                        bc2,
                    );
                    adam_update(
                        net.biases[l].as_mut_slice(),
                        grads.d_biases[l].as_slice(),
                        self.m_b[l].as_mut_slice(),
                        self.v_b[l].as_mut_slice(),
                        self.lr,
                        bc1,
                        bc2,
                    );
                }
            }
        }
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grads[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grads[i] * grads[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// One pass over `pairs` in shuffled mini-batches.
///
/// On a non-finite loss or parameter the epoch aborts: pre-epoch parameters
/// are restored, the learn rate is halved, and a recoverable
/// [`Error::Training`] is returned. Otherwise returns the post-epoch mean
/// weighted squared residual over the full pair set.
pub fn train_epoch(
    net: &mut GradNet,
    pairs: &[TaylorPair],
    cfg: &LossConfig,
    opt: &mut AdamState,
    rng: &mut Rng,
) -> Result<f64> {
    train_epoch_steps(net, pairs, cfg, opt, rng)?;
    Ok(batch_loss(cfg.variant, net, pairs))
}

/// The update pass of [`train_epoch`] without the closing loss evaluation;
/// the hot loop calls this when nobody reads the epoch loss.
pub fn train_epoch_steps(
    net: &mut GradNet,
    pairs: &[TaylorPair],
    cfg: &LossConfig,
    opt: &mut AdamState,
    rng: &mut Rng,
) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Config("train_epoch needs a non-empty pair set".into()));
    }
    let snapshot = (net.weights.clone(), net.biases.clone());

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    rng.shuffle(&mut order);

    let mut coeffs: Vec<f64> = Vec::with_capacity(cfg.batch_size);
    for chunk in order.chunks(cfg.batch_size.max(1)) {
        coeffs.clear();
        let uniform = 1.0 / chunk.len() as f64;
        for &idx in chunk {
            coeffs.push(if cfg.variant.weighted() {
                pairs[idx].weight
            } else {
                uniform
            });
        }

        let (loss, grads) =
            loss_and_grad_indexed(cfg.variant, cfg.jacobian_attached, net, pairs, chunk, &coeffs);
        if !loss.is_finite() {
            net.weights = snapshot.0;
            net.biases = snapshot.1;
            opt.lr *= 0.5;
            return Err(Error::Training(format!(
                "non-finite loss; restored parameters, learn rate halved to {}",
                opt.lr
            )));
        }
        opt.step(net, &grads);
        let broken = net.weights.iter().any(|w| w.iter().any(|v| !v.is_finite()))
            || net.biases.iter().any(|b| b.iter().any(|v| !v.is_finite()));
        if broken {
            net.weights = snapshot.0;
            net.biases = snapshot.1;
            opt.lr *= 0.5;
            return Err(Error::Training(format!(
                "non-finite parameters after step; restored, learn rate halved to {}",
                opt.lr
            )));
        }
    }

    Ok(())
}
