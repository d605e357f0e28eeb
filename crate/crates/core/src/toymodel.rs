//! The toy autoencoder under study: sparse feature batches, the
//! ReLU(WᵀWx + b) forward pass, MSE loss, and closed-form gradients with
//! respect to both parameters and inputs.
//!
//! Naming: `n_features` is the data dimension n, `n_hidden` the bottleneck m.
//! `W` is m×n, so feature i is embedded as column i of `W`; the hidden state
//! is h = Wx and the reconstruction is x' = ReLU(Wᵀh + b).
//!
//! The loss is the mean of squared errors over both the batch and the feature
//! axes, which keeps it scale-free in batch size and n. The ReLU subgradient
//! at exactly zero is taken to be zero.

use crate::error::{Error, Result};
use crate::numkit::{gemm_into, matvec, matvec_t, Matrix, Rng, Vector};

/// ReLU-output toy autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub n_features: usize,
    pub n_hidden: usize,
    /// m×n embedding matrix; column i is feature i's direction.
    pub w: Matrix,
    /// Output bias, length n.
    pub b: Vector,
}

impl ToyModel {
    pub fn new(w: Matrix, b: Vector) -> Self {
        let (m, n) = (w.rows(), w.cols());
        assert_eq!(b.len(), n, "bias length {} != n_features {}", b.len(), n);
        ToyModel {
            n_features: n,
            n_hidden: m,
            w,
            b,
        }
    }

    /// Small symmetric start: W ~ N(0, 1/√m) entrywise, b = 0.
    pub fn init_random(n_features: usize, n_hidden: usize, rng: &mut Rng) -> Self {
        let std = 1.0 / (n_hidden as f64).sqrt();
        let mut w = Matrix::zeros(n_hidden, n_features);
        rng.fill_gaussian(w.data_mut(), 0.0, std);
        ToyModel::new(w, Vector::zeros(n_features))
    }

    /// x' = ReLU(Wᵀ(Wx) + b).
    pub fn forward(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.n_features, "forward dimension mismatch");
        let h = matvec(&self.w, x);
        let mut pre = matvec_t(&self.w, &h);
        for (p, bi) in pre.as_mut_slice().iter_mut().zip(self.b.as_slice()) {
            *p = (*p + bi).max(0.0);
        }
        pre
    }

    /// Mean squared reconstruction error of a single example (mean over the
    /// feature axis, matching the batch loss reduction).
    pub fn per_example_loss(&self, x: &Vector) -> f64 {
        let out = self.forward(x);
        let n = self.n_features as f64;
        out.as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(r, t)| (r - t) * (r - t))
            .sum::<f64>()
            / n
    }

    /// Mean squared error over batch and feature axes.
    pub fn loss(&self, batch: &FeatureBatch) -> f64 {
        self.loss_matrix(&batch.data)
    }

    /// Batch loss over raw rows (adversarial inputs are not FeatureBatches).
    pub fn loss_matrix(&self, x: &Matrix) -> f64 {
        assert!(x.rows() > 0, "empty batch");
        let mut scratch = BatchScratch::default();
        let mut sum = 0.0;
        scratch.forward(self, x);
        let n = self.n_features as f64;
        for i in 0..x.rows() {
            let pre = scratch.pre.row(i);
            let xi = x.row(i);
            for j in 0..x.cols() {
                let e = pre[j].max(0.0) - xi[j];
                sum += e * e;
            }
        }
        sum / (x.rows() as f64 * n)
    }

    /// Exact gradient of the batch loss with respect to W and b.
    pub fn grad_params(&self, batch: &FeatureBatch) -> ModelGradients {
        let mut grads = ModelGradients::zeros_like(self);
        let mut scratch = BatchScratch::default();
        self.loss_and_grad(&batch.data, &mut scratch, &mut grads);
        grads
    }

    /// Fused batch loss + parameter gradient; the training hot path.
    /// Returns the loss. All per-step buffers live in `scratch`.
    pub fn loss_and_grad(
        &self,
        x: &Matrix,
        scratch: &mut BatchScratch,
        grads: &mut ModelGradients,
    ) -> f64 {
        assert!(x.rows() > 0, "empty batch");
        assert_eq!(x.cols(), self.n_features, "batch feature dimension mismatch");
        assert_eq!(grads.dw.rows(), self.n_hidden);
        assert_eq!(grads.dw.cols(), self.n_features);
        let bsz = x.rows();
        let n = self.n_features;
        scratch.forward(self, x);

        // Elementwise pass: loss, and GY = ∂loss/∂pre folded with the ReLU
        // mask and the 2/(B·n) reduction factor. GY overwrites `pre`.
        let c = 2.0 / (bsz as f64 * n as f64);
        let mut sum = 0.0;
        for i in 0..bsz {
            let pre = scratch.pre.row_mut(i);
            let xi = x.row(i);
            for j in 0..n {
                let p = pre[j];
                let e = p.max(0.0) - xi[j];
                sum += e * e;
                pre[j] = if p > 0.0 { c * e } else { 0.0 };
            }
        }
        let gy = &scratch.pre;

        // db = column sums of GY.
        grads.db.as_mut_slice().fill(0.0);
        for i in 0..bsz {
            for (d, g) in grads.db.as_mut_slice().iter_mut().zip(gy.row(i)) {
                *d += g;
            }
        }

        // GH = GY·Wᵀ; dW = Hᵀ·GY + GHᵀ·X.
        scratch.gh.ensure(bsz, self.n_hidden);
        gemm_into(&mut scratch.gh.m, 0.0, 1.0, gy, false, &self.w, true);
        gemm_into(&mut grads.dw, 0.0, 1.0, &scratch.h.m, true, gy, false);
        gemm_into(&mut grads.dw, 1.0, 1.0, &scratch.gh.m, true, x, false);

        sum / (bsz as f64 * n as f64)
    }

    /// Exact gradient of the per-example loss with respect to the input,
    /// flowing through both the WᵀWx path and the −x residual path.
    pub fn grad_input(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.n_features, "grad_input dimension mismatch");
        let n = self.n_features as f64;
        let h = matvec(&self.w, x);
        let pre = matvec_t(&self.w, &h);
        let mut e = Vector::zeros(self.n_features);
        let mut gy = Vector::zeros(self.n_features);
        for j in 0..self.n_features {
            let p = pre[j] + self.b[j];
            let ej = p.max(0.0) - x[j];
            e[j] = ej;
            gy[j] = if p > 0.0 { 2.0 / n * ej } else { 0.0 };
        }
        // grad = Wᵀ(W·gy) − (2/n)·e
        let wgy = matvec(&self.w, &gy);
        let mut grad = matvec_t(&self.w, &wgy);
        grad.add_scaled(&e, -2.0 / n);
        grad
    }

    /// Batched `grad_input`: row i of the output is the gradient of example
    /// i's own (per-example) loss. Used by the gradient attack.
    pub fn grad_input_batch(&self, x: &Matrix, scratch: &mut BatchScratch, out: &mut Matrix) {
        assert_eq!(x.cols(), self.n_features, "batch feature dimension mismatch");
        assert_eq!((out.rows(), out.cols()), (x.rows(), x.cols()), "output shape mismatch");
        let bsz = x.rows();
        let n = self.n_features;
        scratch.forward(self, x);
        scratch.e.ensure(bsz, n);
        let c = 2.0 / n as f64;
        for i in 0..bsz {
            let pre = scratch.pre.row_mut(i);
            let ei = scratch.e.m.row_mut(i);
            let xi = x.row(i);
            for j in 0..n {
                let p = pre[j];
                let e = p.max(0.0) - xi[j];
                ei[j] = e;
                pre[j] = if p > 0.0 { c * e } else { 0.0 };
            }
        }
        let gy = &scratch.pre;
        scratch.gh.ensure(bsz, self.n_hidden);
        gemm_into(&mut scratch.gh.m, 0.0, 1.0, gy, false, &self.w, true);
        gemm_into(out, 0.0, 1.0, &scratch.gh.m, false, &self.w, false);
        out.add_scaled(&scratch.e.m, -c);
    }

    /// Hidden activations h = Wx for every row of `x`, as a batch matrix.
    pub fn hidden_batch(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.cols(), self.n_features, "batch feature dimension mismatch");
        x.matmul_nt(&self.w)
    }

    /// Per-example losses for every row of `x`, written into `out`.
    pub fn per_example_losses_batch(
        &self,
        x: &Matrix,
        scratch: &mut BatchScratch,
        out: &mut Vec<f64>,
    ) {
        assert_eq!(x.cols(), self.n_features, "batch feature dimension mismatch");
        scratch.forward(self, x);
        let n = self.n_features as f64;
        out.clear();
        for i in 0..x.rows() {
            let pre = scratch.pre.row(i);
            let xi = x.row(i);
            let mut sum = 0.0;
            for j in 0..x.cols() {
                let e = pre[j].max(0.0) - xi[j];
                sum += e * e;
            }
            out.push(sum / n);
        }
    }
}

/// Gradients paired with the owning model's shapes.
#[derive(Debug, Clone)]
pub struct ModelGradients {
    pub dw: Matrix,
    pub db: Vector,
}

impl ModelGradients {
    pub fn zeros_like(model: &ToyModel) -> Self {
        ModelGradients {
            dw: Matrix::zeros(model.n_hidden, model.n_features),
            db: Vector::zeros(model.n_features),
        }
    }
}

/// Batch of synthetic sparse feature vectors, one per row.
#[derive(Debug, Clone)]
pub struct FeatureBatch {
    /// batch_size × n_features; sampled entries lie in [0, 1].
    pub data: Matrix,
    /// Probability that a feature is active (1 − sparsity).
    pub density: f64,
}

impl FeatureBatch {
    pub fn batch_size(&self) -> usize {
        self.data.rows()
    }

    pub fn n_features(&self) -> usize {
        self.data.cols()
    }
}

/// Draw a batch: each entry is independently zero with probability
/// 1 − density, otherwise Uniform(0,1). Two uniforms are consumed per entry
/// (gate, then value) so stream consumption is data-independent.
pub fn sample_batch(
    rng: &mut Rng,
    batch_size: usize,
    n_features: usize,
    density: f64,
) -> Result<FeatureBatch> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidDensity(density));
    }
    if batch_size == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut data = Matrix::zeros(batch_size, n_features);
    fill_batch(rng, &mut data, density);
    Ok(FeatureBatch { data, density })
}

/// Overwrite `data` with a fresh sparse batch; allocation-free inner-loop
/// variant of [`sample_batch`] (density must already be validated).
pub(crate) fn fill_batch(rng: &mut Rng, data: &mut Matrix, density: f64) {
    for v in data.data_mut() {
        let gate = rng.uniform_open01();
        let value = rng.uniform_open01();
        *v = if gate < density { value } else { 0.0 };
    }
}

// ── Batch workspace ──────────────────────────────────────────────────────────

/// Lazily-sized buffer; avoids reallocating across training steps.
#[derive(Debug, Default)]
pub(crate) struct Buf {
    pub m: Matrix,
}

impl Buf {
    pub fn ensure(&mut self, rows: usize, cols: usize) {
        if self.m.rows() != rows || self.m.cols() != cols {
            self.m = Matrix::zeros(rows, cols);
        }
    }
}

/// Reusable buffers for batched forward/backward passes.
#[derive(Debug, Default)]
pub struct BatchScratch {
    pub(crate) h: Buf,
    /// Pre-activations on entry to the elementwise pass; overwritten by GY.
    pub(crate) pre: Matrix,
    pub(crate) gh: Buf,
    pub(crate) e: Buf,
}

impl BatchScratch {
    /// H = X·Wᵀ and pre = H·W + b (bias broadcast over rows).
    pub(crate) fn forward(&mut self, model: &ToyModel, x: &Matrix) {
        let bsz = x.rows();
        self.h.ensure(bsz, model.n_hidden);
        if self.pre.rows() != bsz || self.pre.cols() != model.n_features {
            self.pre = Matrix::zeros(bsz, model.n_features);
        }
        gemm_into(&mut self.h.m, 0.0, 1.0, x, false, &model.w, true);
        gemm_into(&mut self.pre, 0.0, 1.0, &self.h.m, false, &model.w, false);
        for i in 0..bsz {
            for (p, bi) in self.pre.row_mut(i).iter_mut().zip(model.b.as_slice()) {
                *p += bi;
            }
        }
    }
}

// ── Tests ────────────────────────────────────────────────────────────────────
