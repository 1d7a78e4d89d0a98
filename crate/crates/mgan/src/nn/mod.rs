//! Minimal dense-network engine: batched forward passes, reverse-mode
//! gradients with respect to parameters and inputs, and the second-order
//! pass needed by gradient penalties.
//!
//! The family is fixed: affine layers with leaky-ReLU on hidden layers and
//! a linear output layer. Batches are matrices with one sample per row.
//! All arithmetic is f64. At the leaky-ReLU kink the derivative takes the
//! alpha side, so gradients are deterministic.

mod adam;
mod checkpoint;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_network, write_network, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// Batch rows processed per cache-resident pass over the weights.
const ROW_BLOCK: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layer_sizes: Vec<usize>,
    /// weights[l] has shape (layer_sizes[l+1], layer_sizes[l]), row-major.
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    /// Leaky-ReLU slope for hidden layers.
    alpha: f64,
}

/// Per-parameter tensors mirroring a network's weights and biases.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Activations recorded during a forward pass, consumed by `backward`.
///
/// `activations[0]` is the input batch, `activations[l]` the post-activation
/// output of layer l; the last entry is the network output.
pub struct ForwardCache {
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache always has input")
    }
}

/// Width of the register accumulator tiles in the backward kernels.
const VEC_TILE: usize = 8;

/// Reverse pass through one affine layer: accumulates dW[j] += sum_r
/// delta[r][j] x[r] and db[j] += sum_r delta[r][j], and writes
/// dX[r] = sum_j delta[r][j] W[j]. Both products reduce over their inner
/// index into register tiles (4 units x 8 lanes), touching memory once
/// per tile instead of once per term.
fn backprop_layer(
    delta: &Matrix,
    input_act: &Matrix,
    w: &Matrix,
    dw: &mut Matrix,
    db: &mut [f64],
    d_in: &mut Matrix,
) {
    let rows = delta.rows();
    let out_dim = w.rows();
    let in_dim = w.cols();
    let j_tiles = out_dim / 4;
    let i_tiles = in_dim / VEC_TILE;

    // dW rows j..j+4, vector tile i0..i0+8, reduced over the batch.
    for jt in 0..j_tiles {
        let j = 4 * jt;
        for it in 0..i_tiles {
            let i0 = VEC_TILE * it;
            let mut acc = [[0.0f64; VEC_TILE]; 4];
            for r in 0..rows {
                let x = &input_act.row(r)[i0..i0 + VEC_TILE];
                let d = &delta.row(r)[j..j + 4];
                for u in 0..4 {
                    let du = d[u];
                    let a = &mut acc[u];
                    for l in 0..VEC_TILE {
                        a[l] = du.mul_add(x[l], a[l]);
                    }
                }
            }
            for u in 0..4 {
                let dst = &mut dw.row_mut(j + u)[i0..i0 + VEC_TILE];
                for l in 0..VEC_TILE {
                    dst[l] += acc[u][l];
                }
            }
        }
        // Remaining input columns for these four units.
        for i in VEC_TILE * i_tiles..in_dim {
            let mut acc = [0.0f64; 4];
            for r in 0..rows {
                let xi = input_act.get(r, i);
                let d = &delta.row(r)[j..j + 4];
                for u in 0..4 {
                    acc[u] = d[u].mul_add(xi, acc[u]);
                }
            }
            for u in 0..4 {
                let v = dw.get(j + u, i) + acc[u];
                dw.set(j + u, i, v);
            }
        }
        let mut bias = [0.0f64; 4];
        for r in 0..rows {
            let d = &delta.row(r)[j..j + 4];
            for u in 0..4 {
                bias[u] += d[u];
            }
        }
        for u in 0..4 {
            db[j + u] += bias[u];
        }
    }
    for j in 4 * j_tiles..out_dim {
        let dwj = dw.row_mut(j);
        let mut bj = 0.0;
        for r in 0..rows {
            let dj = delta.get(r, j);
            bj += dj;
            if dj != 0.0 {
                axpy(dwj, dj, input_act.row(r));
            }
        }
        db[j] += bj;
    }

    // dX rows r..r+4, vector tile i0..i0+8, reduced over output units.
    let r_tiles = rows / 4;
    for rt in 0..r_tiles {
        let r = 4 * rt;
        for it in 0..i_tiles {
            let i0 = VEC_TILE * it;
            let mut acc = [[0.0f64; VEC_TILE]; 4];
            for j in 0..out_dim {
                let wj = &w.row(j)[i0..i0 + VEC_TILE];
                for u in 0..4 {
                    let du = delta.get(r + u, j);
                    let a = &mut acc[u];
                    for l in 0..VEC_TILE {
                        a[l] = du.mul_add(wj[l], a[l]);
                    }
                }
            }
            for u in 0..4 {
                d_in.row_mut(r + u)[i0..i0 + VEC_TILE].copy_from_slice(&acc[u]);
            }
        }
        for i in VEC_TILE * i_tiles..in_dim {
            let mut acc = [0.0f64; 4];
            for j in 0..out_dim {
                let wji = w.get(j, i);
                for u in 0..4 {
                    acc[u] = delta.get(r + u, j).mul_add(wji, acc[u]);
                }
            }
            for u in 0..4 {
                d_in.set(r + u, i, acc[u]);
            }
        }
    }
    for r in 4 * r_tiles..rows {
        let d_in_r = d_in.row_mut(r);
        for j in 0..out_dim {
            let dj = delta.get(r, j);
            if dj != 0.0 {
                axpy(d_in_r, dj, w.row(j));
            }
        }
    }
}

fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "need at least input and output layer sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::Config(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl DenseNetwork {
    /// He-style initialization adjusted for the leaky-ReLU gain:
    /// weights ~ N(0, 2 / ((1 + alpha^2) * fan_in)), biases zero.
    /// Deterministic for a given seed.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        Self::init_with_alpha(layer_sizes, DEFAULT_LEAKY_SLOPE, seed)
    }

    pub fn init_with_alpha(layer_sizes: &[usize], alpha: f64, seed: u64) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let mut rng = crate::rngs::rng_from_seed(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_sizes.len() - 1 {
            let fan_in = layer_sizes[l];
            let fan_out = layer_sizes[l + 1];
            let std = (2.0 / ((1.0 + alpha * alpha) * fan_in as f64)).sqrt();
            let mut w = Matrix::zeros(fan_out, fan_in);
            for v in w.data_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *v = std * g;
            }
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(DenseNetwork { layer_sizes: layer_sizes.to_vec(), weights, biases, alpha })
    }

    /// All-zero parameters; mostly for tests and hand-built maps.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let weights = (0..layer_sizes.len() - 1)
            .map(|l| Matrix::zeros(layer_sizes[l + 1], layer_sizes[l]))
            .collect();
        let biases = (0..layer_sizes.len() - 1)
            .map(|l| vec![0.0; layer_sizes[l + 1]])
            .collect();
        Ok(DenseNetwork {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            alpha: DEFAULT_LEAKY_SLOPE,
        })
    }

    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        alpha: f64,
    ) -> Result<Self> {
        validate_layer_sizes(&layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(Error::Shape("parameter count does not match layer sizes".into()));
        }
        for l in 0..weights.len() {
            if weights[l].rows() != layer_sizes[l + 1]
                || weights[l].cols() != layer_sizes[l]
                || biases[l].len() != layer_sizes[l + 1]
            {
                return Err(Error::Shape(format!("parameter shape mismatch in layer {l}")));
            }
        }
        Ok(DenseNetwork { layer_sizes, weights, biases, alpha })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, l: usize) -> &Matrix {
        &self.weights[l]
    }

    pub fn weight_mut(&mut self, l: usize) -> &mut Matrix {
        &mut self.weights[l]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.biases[l]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut Vec<f64> {
        &mut self.biases[l]
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.data().len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Affine layer: out = input * W^T + b, register-tiled 4 rows x 4
    /// units with 8-lane vector accumulators reducing over the inputs.
    fn affine(&self, l: usize, input: &Matrix) -> Matrix {
        let w = &self.weights[l];
        let b = &self.biases[l];
        let rows = input.rows();
        let out_dim = w.rows();
        let in_dim = w.cols();
        let mut out = Matrix::zeros(rows, out_dim);
        let r_tiles = rows / 2;
        let o_tiles = out_dim / 2;
        let i_tiles = in_dim / VEC_TILE;

        for rt in 0..r_tiles {
            let r = 2 * rt;
            let xr = [input.row(r), input.row(r + 1)];
            for ot in 0..o_tiles {
                let j = 2 * ot;
                let wj = [w.row(j), w.row(j + 1)];
                let mut a00 = [0.0f64; VEC_TILE];
                let mut a01 = [0.0f64; VEC_TILE];
                let mut a10 = [0.0f64; VEC_TILE];
                let mut a11 = [0.0f64; VEC_TILE];
                for it in 0..i_tiles {
                    let i0 = VEC_TILE * it;
                    let x0 = &xr[0][i0..i0 + VEC_TILE];
                    let x1 = &xr[1][i0..i0 + VEC_TILE];
                    let w0 = &wj[0][i0..i0 + VEC_TILE];
                    let w1 = &wj[1][i0..i0 + VEC_TILE];
                    for l2 in 0..VEC_TILE {
                        a00[l2] = x0[l2].mul_add(w0[l2], a00[l2]);
                        a01[l2] = x0[l2].mul_add(w1[l2], a01[l2]);
                        a10[l2] = x1[l2].mul_add(w0[l2], a10[l2]);
                        a11[l2] = x1[l2].mul_add(w1[l2], a11[l2]);
                    }
                }
                let mut s = [
                    a00.iter().sum::<f64>(),
                    a01.iter().sum::<f64>(),
                    a10.iter().sum::<f64>(),
                    a11.iter().sum::<f64>(),
                ];
                for i in VEC_TILE * i_tiles..in_dim {
                    s[0] = xr[0][i].mul_add(wj[0][i], s[0]);
                    s[1] = xr[0][i].mul_add(wj[1][i], s[1]);
                    s[2] = xr[1][i].mul_add(wj[0][i], s[2]);
                    s[3] = xr[1][i].mul_add(wj[1][i], s[3]);
                }
                out.set(r, j, s[0] + b[j]);
                out.set(r, j + 1, s[1] + b[j + 1]);
                out.set(r + 1, j, s[2] + b[j]);
                out.set(r + 1, j + 1, s[3] + b[j + 1]);
            }
            for j in 2 * o_tiles..out_dim {
                let wjr = w.row(j);
                out.set(r, j, b[j] + dot(xr[0], wjr));
                out.set(r + 1, j, b[j] + dot(xr[1], wjr));
            }
        }
        for r in 2 * r_tiles..rows {
            let x = input.row(r);
            for j in 0..out_dim {
                out.set(r, j, b[j] + dot(x, w.row(j)));
            }
        }
        out
    }

    fn apply_leaky(&self, m: &mut Matrix) {
        let a = self.alpha;
        for v in m.data_mut() {
            if *v < 0.0 {
                *v *= a;
            }
        }
    }

    /// Batched forward pass; pure, returns the output batch.
    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(input)?.0)
    }

    /// Forward pass for a single sample.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.forward(&Matrix::row_vector(x))?;
        Ok(out.row(0).to_vec())
    }

    /// Forward pass keeping per-layer activations for `backward`.
    pub fn forward_cached(&self, input: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        activations.push(input.clone());
        for l in 0..self.num_layers() {
            let mut out = self.affine(l, activations.last().unwrap());
            if l + 1 < self.num_layers() {
                self.apply_leaky(&mut out);
            }
            if !out.is_finite() {
                return Err(Error::Numerical(format!("non-finite activation in layer {l}")));
            }
            activations.push(out);
        }
        let output = activations.last().unwrap().clone();
        Ok((output, ForwardCache { activations }))
    }

    /// Derivative of the hidden activation recovered from its output value:
    /// leaky-ReLU preserves sign, and the kink takes the alpha side.
    #[inline]
    fn act_grad(&self, post: f64) -> f64 {
        if post > 0.0 {
            1.0
        } else {
            self.alpha
        }
    }

    /// Reverse-mode pass. `d_output` holds dLoss/d(output) per row.
    /// Returns parameter gradients and dLoss/d(input).
    pub fn backward(&self, cache: &ForwardCache, d_output: &Matrix) -> (Gradients, Matrix) {
        let mut grads = Gradients::zeros_like(self);
        let d_input = self.backward_accumulate(cache, d_output, &mut grads);
        (grads, d_input)
    }

    /// Like `backward` but accumulates parameter gradients into `grads`.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        d_output: &Matrix,
        grads: &mut Gradients,
    ) -> Matrix {
        let rows = d_output.rows();
        assert_eq!(d_output.cols(), self.output_dim(), "upstream gradient width");
        assert_eq!(cache.activations[0].rows(), rows, "cache/batch row mismatch");

        let mut delta = d_output.clone();
        for l in (0..self.num_layers()).rev() {
            // Output layer is linear; hidden layers apply the leaky mask.
            if l + 1 < self.num_layers() {
                let post = &cache.activations[l + 1];
                for r in 0..rows {
                    let pr = post.row(r);
                    for (d, &p) in delta.row_mut(r).iter_mut().zip(pr) {
                        *d *= self.act_grad(p);
                    }
                }
            }
            let input_act = &cache.activations[l];
            let w = &self.weights[l];
            let dw = &mut grads.weights[l];
            let db = &mut grads.biases[l];
            let mut d_in = Matrix::zeros(rows, w.cols());
            backprop_layer(&delta, input_act, w, dw, db, &mut d_in);
            delta = d_in;
        }
        delta
    }

    /// Gradient of a batch loss with respect to all parameters.
    ///
    /// `loss` maps the output batch to (loss value, dLoss/d(output)).
    /// Returns the loss value alongside the gradients.
    pub fn grad_params(
        &self,
        input: &Matrix,
        loss: impl FnOnce(&Matrix) -> (f64, Matrix),
    ) -> Result<(f64, Gradients)> {
        if input.rows() == 0 {
            return Err(Error::Contract("empty batch".into()));
        }
        let (output, cache) = self.forward_cached(input)?;
        let (value, d_output) = loss(&output);
        if d_output.rows() != output.rows() || d_output.cols() != output.cols() {
            return Err(Error::Shape("loss gradient shape does not match output".into()));
        }
        let (grads, _) = self.backward(&cache, &d_output);
        Ok((value, grads))
    }

    /// Gradient of the scalar output with respect to the input, per row.
    pub fn grad_input(&self, input: &Matrix) -> Result<Matrix> {
        if self.output_dim() != 1 {
            return Err(Error::Contract(format!(
                "grad_input requires a scalar-output network, output dim is {}",
                self.output_dim()
            )));
        }
        let (_, cache) = self.forward_cached(input)?;
        let ones = {
            let mut m = Matrix::zeros(input.rows(), 1);
            m.fill(1.0);
            m
        };
        let (_, d_input) = self.backward(&cache, &ones);
        Ok(d_input)
    }

    /// Second-order pass for gradient penalties on scalar-output networks.
    ///
    /// For each row z_j, with g_j = grad_z f(z_j) and c_j = `coeff`(|g_j|),
    /// accumulates into `grads` the parameter gradient of
    /// sum_j <c_j * g_j, grad_z f(z_j)>, where the first factor is treated
    /// as a constant. Choosing `coeff` appropriately makes this exactly the
    /// parameter gradient of sum_j penalty(|g_j|). Returns the |g_j| values.
    ///
    /// Leaky-ReLU has zero curvature away from its kink, so the activation
    /// pattern is treated as locally constant; rows with |g_j| = 0 are
    /// skipped by giving them a zero coefficient.
    pub fn weighted_input_grad_param_grad(
        &self,
        input: &Matrix,
        coeff: impl Fn(f64) -> f64,
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        if self.output_dim() != 1 {
            return Err(Error::Contract(
                "gradient penalty requires a scalar-output network".into(),
            ));
        }
        let rows = input.rows();
        let (_, cache) = self.forward_cached(input)?;

        // First-order input gradients g_j.
        let ones = {
            let mut m = Matrix::zeros(rows, 1);
            m.fill(1.0);
            m
        };
        let (_, g) = self.backward(&cache, &ones);

        let mut norms = Vec::with_capacity(rows);
        let mut v = Matrix::zeros(rows, self.input_dim());
        for r in 0..rows {
            let norm = dot(g.row(r), g.row(r)).sqrt();
            norms.push(norm);
            let c = if norm > 0.0 { coeff(norm) } else { 0.0 };
            if c != 0.0 {
                axpy(v.row_mut(r), c, g.row(r));
            }
        }

        // Tangent forward: u_0 = v, s_l = u_{l-1} W_l^T, u_l = mask_l ⊙ s_l.
        // Biases do not enter; the scalar tangent output is <v, g>.
        let mut tangents: Vec<Matrix> = Vec::with_capacity(self.num_layers() + 1);
        tangents.push(v);
        for l in 0..self.num_layers() {
            let prev = tangents.last().unwrap();
            let w = &self.weights[l];
            let mut s = Matrix::zeros(rows, w.rows());
            for rb in (0..rows).step_by(ROW_BLOCK) {
                let rend = (rb + ROW_BLOCK).min(rows);
                for j in 0..w.rows() {
                    let wj = w.row(j);
                    for r in rb..rend {
                        s.set(r, j, dot(prev.row(r), wj));
                    }
                }
            }
            if l + 1 < self.num_layers() {
                let post = &cache.activations[l + 1];
                for r in 0..rows {
                    let pr = post.row(r);
                    for (sv, &p) in s.row_mut(r).iter_mut().zip(pr) {
                        *sv *= self.act_grad(p);
                    }
                }
            }
            tangents.push(s);
        }

        // Backward through the tangent computation; only weights pick up
        // gradient, and the inputs to each layer are tangent activations.
        let mut delta = {
            let mut m = Matrix::zeros(rows, 1);
            m.fill(1.0);
            m
        };
        for l in (0..self.num_layers()).rev() {
            if l + 1 < self.num_layers() {
                let post = &cache.activations[l + 1];
                for r in 0..rows {
                    let pr = post.row(r);
                    for (d, &p) in delta.row_mut(r).iter_mut().zip(pr) {
                        *d *= self.act_grad(p);
                    }
                }
            }
            let u_prev = &tangents[l];
            let w = &self.weights[l];
            let dw = &mut grads.weights[l];
            let mut d_prev = Matrix::zeros(rows, w.cols());
            for rb in (0..rows).step_by(ROW_BLOCK) {
                let rend = (rb + ROW_BLOCK).min(rows);
                for j in 0..w.rows() {
                    let wj = w.row(j);
                    let dwj = dw.row_mut(j);
                    for r in rb..rend {
                        let dj = delta.get(r, j);
                        if dj != 0.0 {
                            axpy(dwj, dj, u_prev.row(r));
                            axpy(d_prev.row_mut(r), dj, wj);
                        }
                    }
                }
            }
            delta = d_prev;
        }

        Ok(norms)
    }
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Gradients {
            weights: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            w.scale(s);
        }
        for b in &mut self.biases {
            for v in b {
                *v *= s;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, s: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.add_scaled(b, s);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            axpy(a, s, b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        let w = self
            .weights
            .iter()
            .flat_map(|m| m.data())
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        self.biases
            .iter()
            .flatten()
            .fold(w, |a, &v| a.max(v.abs()))
    }

    pub fn matches(&self, net: &DenseNetwork) -> bool {
        self.weights.len() == net.weights.len()
            && self
                .weights
                .iter()
                .zip(&net.weights)
                .all(|(g, w)| g.rows() == w.rows() && g.cols() == w.cols())
            && self
                .biases
                .iter()
                .zip(&net.biases)
                .all(|(g, b)| g.len() == b.len())
    }
}
