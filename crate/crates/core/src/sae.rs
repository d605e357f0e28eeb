//! Sparse autoencoders (TopK and L1-ReLU) over activation datasets, used as a
//! superposition proxy: more superposition in the underlying model means more
//! features for the SAE to model and a higher reconstruction loss at fixed
//! sparsity.
//!
//! Encoder: z = ReLU(W_enc(x − b_pre) + b_enc), optionally restricted to the
//! k largest post-ReLU values (TopK, ties broken by lowest index). Decoder:
//! x̂ = W_dec·z + b_pre.
//!
//! TopK training adds the auxiliary dead-latent loss: the reconstruction
//! residual is re-predicted from the top-k_aux currently-dead latents, which
//! feeds gradient to latents that stopped firing. A latent counts as dead
//! after `dead_threshold_steps` training batches without activating. The L1
//! variant instead penalizes λ·‖z‖₁ and renormalizes decoder columns to unit
//! norm after every step.
//!
//! Datasets must be standardized before training; the fitted statistics ride
//! along in the SAE so later data (e.g. adversarial activations) can be
//! mapped into the same space.

use crate::error::{Error, Result};
use crate::numkit::{gemm_into, Matrix, Rng, Vector};
use crate::toymodel::{FeatureBatch, ToyModel};
use crate::training::adam_update;
use serde::{Deserialize, Serialize};

const STREAM_SAE_INIT: u64 = 10;
const STREAM_SAE_BATCH: u64 = 11;

// ── Activation datasets ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardizeMode {
    /// Separate mean/std per activation dimension.
    PerDimension,
    /// One scalar mean/std over all entries.
    GlobalScalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizeStats {
    pub mean: Vector,
    pub std: Vector,
    pub mode: StandardizeMode,
}

/// A set of activation vectors (one per row) plus optional standardization
/// metadata describing the transform already applied to `data`.
#[derive(Debug, Clone)]
pub struct ActivationDataset {
    pub data: Matrix,
    pub standardization: Option<StandardizeStats>,
    pub provenance: String,
}

impl ActivationDataset {
    pub fn new(data: Matrix, provenance: impl Into<String>) -> Self {
        ActivationDataset {
            data,
            standardization: None,
            provenance: provenance.into(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }
}

/// Hidden activations h = Wx for each row of `x`.
pub fn collect_activations(model: &ToyModel, x: &Matrix) -> ActivationDataset {
    ActivationDataset::new(model.hidden_batch(x), "toymodel-hidden")
}

/// Convenience wrapper over a sampled feature batch.
pub fn collect_activations_from_batch(model: &ToyModel, batch: &FeatureBatch) -> ActivationDataset {
    collect_activations(model, &batch.data)
}

/// Standardize per dimension to zero mean / unit variance. Dimensions with
/// std < 1e-12 are centered only (std clamped to 1). Needs ≥ 2 samples.
pub fn standardize(ds: &ActivationDataset) -> Result<ActivationDataset> {
    standardize_with_mode(ds, StandardizeMode::PerDimension)
}

pub fn standardize_with_mode(
    ds: &ActivationDataset,
    mode: StandardizeMode,
) -> Result<ActivationDataset> {
    let n = ds.n_samples();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let d = ds.dim();
    let (mean, std) = match mode {
        StandardizeMode::PerDimension => {
            let mut mean = Vector::zeros(d);
            for i in 0..n {
                for (m, v) in mean.as_mut_slice().iter_mut().zip(ds.data.row(i)) {
                    *m += v;
                }
            }
            for m in mean.as_mut_slice() {
                *m /= n as f64;
            }
            let mut var = Vector::zeros(d);
            for i in 0..n {
                for ((s, v), m) in var
                    .as_mut_slice()
                    .iter_mut()
                    .zip(ds.data.row(i))
                    .zip(mean.as_slice())
                {
                    *s += (v - m) * (v - m);
                }
            }
            let mut std = Vector::zeros(d);
            for (s, v) in std.as_mut_slice().iter_mut().zip(var.as_slice()) {
                let sd = (v / n as f64).sqrt();
                *s = if sd < 1e-12 { 1.0 } else { sd };
            }
            (mean, std)
        }
        StandardizeMode::GlobalScalar => {
            let total = (n * d) as f64;
            let mu = ds.data.data().iter().sum::<f64>() / total;
            let var = ds.data.data().iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / total;
            let sd = var.sqrt();
            let sd = if sd < 1e-12 { 1.0 } else { sd };
            (
                Vector::from_vec(vec![mu; d]),
                Vector::from_vec(vec![sd; d]),
            )
        }
    };
    let stats = StandardizeStats { mean, std, mode };
    Ok(apply_stats(ds, &stats))
}

/// Apply existing statistics (e.g. the clean-data stats to adversarial data).
pub fn standardize_like(ds: &ActivationDataset, stats: &StandardizeStats) -> ActivationDataset {
    assert_eq!(ds.dim(), stats.mean.len(), "standardization dimension mismatch");
    apply_stats(ds, stats)
}

fn apply_stats(ds: &ActivationDataset, stats: &StandardizeStats) -> ActivationDataset {
    let mut data = ds.data.clone();
    for i in 0..data.rows() {
        for ((v, m), s) in data
            .row_mut(i)
            .iter_mut()
            .zip(stats.mean.as_slice())
            .zip(stats.std.as_slice())
        {
            *v = (*v - m) / s;
        }
    }
    ActivationDataset {
        data,
        standardization: Some(stats.clone()),
        provenance: ds.provenance.clone(),
    }
}

/// Invert standardization, restoring the raw activation space.
pub fn destandardize(ds: &ActivationDataset) -> Result<ActivationDataset> {
    let stats = ds.standardization.as_ref().ok_or(Error::NotStandardized)?;
    let mut data = ds.data.clone();
    for i in 0..data.rows() {
        for ((v, m), s) in data
            .row_mut(i)
            .iter_mut()
            .zip(stats.mean.as_slice())
            .zip(stats.std.as_slice())
        {
            *v = *v * s + m;
        }
    }
    Ok(ActivationDataset {
        data,
        standardization: None,
        provenance: ds.provenance.clone(),
    })
}

// ── Model ────────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SaeVariant {
    TopK { k: usize, k_aux: usize, aux_weight: f64 },
    L1 { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaeModel {
    pub input_dim: usize,
    pub dict_size: usize,
    /// dict_size × input_dim.
    pub w_enc: Matrix,
    pub b_enc: Vector,
    /// input_dim × dict_size; latent j decodes as column j.
    pub w_dec: Matrix,
    pub b_pre: Vector,
    pub variant: SaeVariant,
    /// Training batches since each latent last activated.
    pub dead_steps: Vec<u64>,
    /// Statistics of the (standardized) training data.
    pub standardization: Option<StandardizeStats>,
}

impl SaeModel {
    /// Sparse code of one input. TopK keeps the k largest post-ReLU values
    /// (ties to the lowest index); L1 keeps the full ReLU output.
    pub fn encode(&self, x: &Vector) -> Vector {
        match self.variant {
            SaeVariant::TopK { k, .. } => self.encode_with_k(x, k),
            SaeVariant::L1 { .. } => self.pre_codes(x),
        }
    }

    /// Post-ReLU codes restricted to the `k` largest entries; works for any
    /// variant (used to probe frozen encoders at different sparsity levels).
    pub fn encode_with_k(&self, x: &Vector, k: usize) -> Vector {
        let mut acts = self.pre_codes(x);
        topk_mask_row(acts.as_mut_slice(), k);
        acts
    }

    /// ReLU(W_enc(x − b_pre) + b_enc) without any selection.
    fn pre_codes(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.input_dim, "encode dimension mismatch");
        let mut u = x.clone();
        u.add_scaled(&self.b_pre, -1.0);
        let mut z = crate::numkit::matvec(&self.w_enc, &u);
        for (zj, bj) in z.as_mut_slice().iter_mut().zip(self.b_enc.as_slice()) {
            *zj = (*zj + bj).max(0.0);
        }
        z
    }

    /// x̂ = W_dec·z + b_pre.
    pub fn decode(&self, z: &Vector) -> Vector {
        assert_eq!(z.len(), self.dict_size, "decode dimension mismatch");
        let mut out = crate::numkit::matvec(&self.w_dec, z);
        out.add_scaled(&self.b_pre, 1.0);
        out
    }

    /// Batched encode; one code row per input row. `k_override` substitutes
    /// the TopK selection width when present.
    pub fn encode_batch(&self, x: &Matrix, k_override: Option<usize>) -> Matrix {
        assert_eq!(x.cols(), self.input_dim, "encode dimension mismatch");
        let bsz = x.rows();
        let mut u = x.clone();
        for i in 0..bsz {
            for (v, bp) in u.row_mut(i).iter_mut().zip(self.b_pre.as_slice()) {
                *v -= bp;
            }
        }
        let mut z = Matrix::zeros(bsz, self.dict_size);
        gemm_into(&mut z, 0.0, 1.0, &u, false, &self.w_enc, true);
        for i in 0..bsz {
            for (zj, bj) in z.row_mut(i).iter_mut().zip(self.b_enc.as_slice()) {
                *zj = (*zj + bj).max(0.0);
            }
        }
        let k = k_override.or(match self.variant {
            SaeVariant::TopK { k, .. } => Some(k),
            SaeVariant::L1 { .. } => None,
        });
        if let Some(k) = k {
            for i in 0..bsz {
                topk_mask_row(z.row_mut(i), k);
            }
        }
        z
    }

    /// Batched decode of a code matrix.
    pub fn decode_batch(&self, z: &Matrix) -> Matrix {
        assert_eq!(z.cols(), self.dict_size, "decode dimension mismatch");
        let mut out = Matrix::zeros(z.rows(), self.input_dim);
        gemm_into(&mut out, 0.0, 1.0, z, false, &self.w_dec, true);
        for i in 0..out.rows() {
            for (v, bp) in out.row_mut(i).iter_mut().zip(self.b_pre.as_slice()) {
                *v += bp;
            }
        }
        out
    }
}

/// Zero all but the k largest entries of a row (ties to the lowest index).
fn topk_mask_row(row: &mut [f64], k: usize) {
    let d = row.len();
    if k >= d {
        return;
    }
    let mut idx: Vec<usize> = (0..d).collect();
    // Descending by value, ascending by index on ties.
    idx.select_nth_unstable_by(k, |&a, &b| {
        row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b))
    });
    let keep = &idx[..k];
    let mut mask = vec![false; d];
    for &i in keep {
        mask[i] = true;
    }
    for (v, keep) in row.iter_mut().zip(mask) {
        if !keep {
            *v = 0.0;
        }
    }
}

// ── Training ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaeTrainConfig {
    pub variant: SaeVariant,
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub expansion_factor: usize,
    /// Batches without activation before a latent counts as dead.
    pub dead_threshold_steps: u64,
    pub seed: u64,
}

impl Default for SaeTrainConfig {
    fn default() -> Self {
        SaeTrainConfig {
            variant: SaeVariant::TopK {
                k: 16,
                k_aux: 512,
                aux_weight: 1.0,
            },
            steps: 50_000,
            learning_rate: 5e-4,
            batch_size: 4096,
            expansion_factor: 8,
            dead_threshold_steps: 1000,
            seed: 0,
        }
    }
}

pub type SaeProgressFn<'a> = &'a (dyn Fn(usize, f64) + Sync);

/// Train an SAE on a standardized dataset. `k_aux` is clamped to
/// min(k_aux, dict_size/2) so toy-scale dictionaries stay valid.
pub fn train_sae(
    ds: &ActivationDataset,
    cfg: &SaeTrainConfig,
    progress: Option<SaeProgressFn>,
) -> Result<SaeModel> {
    if ds.standardization.is_none() {
        return Err(Error::NotStandardized);
    }
    if ds.n_samples() == 0 {
        return Err(Error::EmptyDataset(ds.provenance.clone()));
    }
    if cfg.steps == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("steps and batch_size must be > 0".into()));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
    }
    if cfg.expansion_factor == 0 {
        return Err(Error::InvalidConfig("expansion_factor must be >= 1".into()));
    }
    let d = ds.dim();
    let dict = cfg.expansion_factor * d;
    let variant = match cfg.variant {
        SaeVariant::TopK { k, k_aux, aux_weight } => {
            if k == 0 || k >= dict {
                return Err(Error::InvalidConfig(format!(
                    "TopK k must be in [1, dict_size); k = {k}, dict_size = {dict}"
                )));
            }
            SaeVariant::TopK {
                k,
                k_aux: k_aux.min(dict / 2).max(1),
                aux_weight,
            }
        }
        SaeVariant::L1 { lambda } => {
            if !(lambda >= 0.0) {
                return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
            }
            SaeVariant::L1 { lambda }
        }
    };

    let mut init_rng = Rng::new(cfg.seed, STREAM_SAE_INIT);
    let mut batch_rng = Rng::new(cfg.seed, STREAM_SAE_BATCH);

    // Decoder columns start at random unit directions; encoder is the
    // transpose; biases start at zero.
    let mut w_dec = Matrix::zeros(d, dict);
    for j in 0..dict {
        let col = init_rng.unit_sphere(d);
        for i in 0..d {
            w_dec.set(i, j, col[i]);
        }
    }
    let mut sae = SaeModel {
        input_dim: d,
        dict_size: dict,
        w_enc: w_dec.transpose(),
        b_enc: Vector::zeros(dict),
        w_dec,
        b_pre: Vector::zeros(d),
        variant,
        dead_steps: vec![0; dict],
        standardization: ds.standardization.clone(),
    };

    let bsz = cfg.batch_size;
    let mut x = Matrix::zeros(bsz, d);
    let mut u = Matrix::zeros(bsz, d);
    let mut pre = Matrix::zeros(bsz, dict);
    let mut z = Matrix::zeros(bsz, dict);
    let mut xhat = Matrix::zeros(bsz, d);
    let mut e = Matrix::zeros(bsz, d);
    let mut gz = Matrix::zeros(bsz, dict);
    let mut gpre_wenc = Matrix::zeros(bsz, d);
    let mut dw_enc = Matrix::zeros(dict, d);
    let mut db_enc = vec![0.0; dict];
    let mut dw_dec = Matrix::zeros(d, dict);
    let mut db_pre = vec![0.0; d];
    // Aux-path buffers (TopK only).
    let mut z_aux = Matrix::zeros(bsz, dict);
    let mut ehat = Matrix::zeros(bsz, d);

    let mut adam = SaeAdam::new(&sae);
    let betas = (0.9, 0.999, 1e-8);

    for step in 0..cfg.steps {
        // Gather a uniform minibatch (indices mod n; bias is negligible for
        // the dataset sizes used here).
        for r in 0..bsz {
            let idx = (batch_rng.next_u64() % ds.n_samples() as u64) as usize;
            x.row_mut(r).copy_from_slice(ds.data.row(idx));
        }

        // Forward.
        u.data_mut().copy_from_slice(x.data());
        for i in 0..bsz {
            for (v, bp) in u.row_mut(i).iter_mut().zip(sae.b_pre.as_slice()) {
                *v -= bp;
            }
        }
        gemm_into(&mut pre, 0.0, 1.0, &u, false, &sae.w_enc, true);
        for i in 0..bsz {
            for (p, bj) in pre.row_mut(i).iter_mut().zip(sae.b_enc.as_slice()) {
                *p += bj;
            }
        }
        z.data_mut()
            .iter_mut()
            .zip(pre.data())
            .for_each(|(zv, pv)| *zv = pv.max(0.0));
        if let SaeVariant::TopK { k, .. } = sae.variant {
            for i in 0..bsz {
                topk_mask_row(z.row_mut(i), k);
            }
        }
        gemm_into(&mut xhat, 0.0, 1.0, &z, false, &sae.w_dec, true);
        for i in 0..bsz {
            for (v, bp) in xhat.row_mut(i).iter_mut().zip(sae.b_pre.as_slice()) {
                *v += bp;
            }
        }

        // Main loss and gradient seed E = 2/(B·d)·(x̂ − x).
        let scale = 2.0 / (bsz * d) as f64;
        let mut main_loss = 0.0;
        for (ev, (xh, xv)) in e
            .data_mut()
            .iter_mut()
            .zip(xhat.data().iter().zip(x.data()))
        {
            let diff = xh - xv;
            main_loss += diff * diff;
            *ev = scale * diff;
        }
        main_loss /= (bsz * d) as f64;

        // G_z = E·W_dec, masked to the selected (nonzero) code entries and
        // the ReLU support; the L1 penalty adds λ/B on active codes.
        gemm_into(&mut gz, 0.0, 1.0, &e, false, &sae.w_dec, false);
        let mut penalty = 0.0;
        match sae.variant {
            SaeVariant::TopK { .. } => {
                for (g, zv) in gz.data_mut().iter_mut().zip(z.data()) {
                    if *zv <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            SaeVariant::L1 { lambda } => {
                let per = lambda / bsz as f64;
                for (g, zv) in gz.data_mut().iter_mut().zip(z.data()) {
                    if *zv > 0.0 {
                        *g += per;
                        penalty += lambda * zv;
                    } else {
                        *g = 0.0;
                    }
                }
                penalty /= bsz as f64;
            }
        }

        // Parameter gradients from the main path.
        gemm_into(&mut dw_enc, 0.0, 1.0, &gz, true, &u, false);
        colsum_into(&gz, &mut db_enc);
        gemm_into(&mut dw_dec, 0.0, 1.0, &e, true, &z, false);
        colsum_into(&e, &mut db_pre);
        gemm_into(&mut gpre_wenc, 0.0, 1.0, &gz, false, &sae.w_enc, false);
        for i in 0..bsz {
            for (dbp, gv) in db_pre.iter_mut().zip(gpre_wenc.row(i)) {
                *dbp -= gv;
            }
        }

        // Auxiliary dead-latent loss: re-predict the residual from the
        // top-k_aux dead latents (residual detached from the main path).
        let mut aux_loss = 0.0;
        if let SaeVariant::TopK { k_aux, aux_weight, .. } = sae.variant {
            let dead: Vec<usize> = sae
                .dead_steps
                .iter()
                .enumerate()
                .filter(|(_, &s)| s >= cfg.dead_threshold_steps)
                .map(|(j, _)| j)
                .collect();
            if !dead.is_empty() && aux_weight > 0.0 {
                z_aux.fill(0.0);
                for i in 0..bsz {
                    // Codes of dead latents only, then top-k_aux among them.
                    let pre_row = pre.row(i);
                    let mut vals: Vec<(f64, usize)> = dead
                        .iter()
                        .map(|&j| (pre_row[j].max(0.0), j))
                        .collect();
                    if vals.len() > k_aux {
                        vals.select_nth_unstable_by(k_aux, |a, b| {
                            b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1))
                        });
                        vals.truncate(k_aux);
                    }
                    let row = z_aux.row_mut(i);
                    for (v, j) in vals {
                        row[j] = v;
                    }
                }
                // ê = Z_aux·W_decᵀ approximates the residual r = x − x̂.
                gemm_into(&mut ehat, 0.0, 1.0, &z_aux, false, &sae.w_dec, true);
                let aux_scale = aux_weight * scale;
                let mut gz_aux = Matrix::zeros(bsz, dict);
                let mut e_aux = Matrix::zeros(bsz, d);
                for i in 0..bsz {
                    let xr = x.row(i);
                    let xh = xhat.row(i);
                    let eh = ehat.row(i);
                    let ea = e_aux.row_mut(i);
                    for jj in 0..d {
                        let r = xr[jj] - xh[jj];
                        let diff = eh[jj] - r;
                        aux_loss += diff * diff;
                        ea[jj] = aux_scale * diff;
                    }
                }
                aux_loss /= (bsz * d) as f64;
                gemm_into(&mut dw_dec, 1.0, 1.0, &e_aux, true, &z_aux, false);
                gemm_into(&mut gz_aux, 0.0, 1.0, &e_aux, false, &sae.w_dec, false);
                for (g, zv) in gz_aux.data_mut().iter_mut().zip(z_aux.data()) {
                    if *zv <= 0.0 {
                        *g = 0.0;
                    }
                }
                gemm_into(&mut dw_enc, 1.0, 1.0, &gz_aux, true, &u, false);
                colsum_into_add(&gz_aux, &mut db_enc);
                gemm_into(&mut gpre_wenc, 0.0, 1.0, &gz_aux, false, &sae.w_enc, false);
                for i in 0..bsz {
                    for (dbp, gv) in db_pre.iter_mut().zip(gpre_wenc.row(i)) {
                        *dbp -= gv;
                    }
                }
            }
        }

        let total_loss = main_loss + penalty + {
            match sae.variant {
                SaeVariant::TopK { aux_weight, .. } => aux_weight * aux_loss,
                SaeVariant::L1 { .. } => 0.0,
            }
        };
        if !total_loss.is_finite() {
            return Err(Error::Divergence {
                step,
                loss: total_loss,
            });
        }
        if let Some(hook) = progress {
            if step % 500 == 0 || step + 1 == cfg.steps {
                hook(step, total_loss);
            }
        }

        adam.step(&mut sae, &dw_enc, &db_enc, &dw_dec, &db_pre, cfg.learning_rate, betas);

        // L1 keeps decoder columns on the unit sphere.
        if matches!(sae.variant, SaeVariant::L1 { .. }) {
            normalize_decoder_columns(&mut sae.w_dec);
        }

        // Dead-latent bookkeeping: active means a nonzero code this batch.
        let mut active = vec![false; dict];
        for i in 0..bsz {
            for (j, zv) in z.row(i).iter().enumerate() {
                if *zv > 0.0 {
                    active[j] = true;
                }
            }
        }
        for (steps, act) in sae.dead_steps.iter_mut().zip(active) {
            *steps = if act { 0 } else { *steps + 1 };
        }
    }

    if !(sae.w_enc.all_finite()
        && sae.w_dec.all_finite()
        && sae.b_enc.all_finite()
        && sae.b_pre.all_finite())
    {
        return Err(Error::Divergence {
            step: cfg.steps,
            loss: f64::NAN,
        });
    }
    Ok(sae)
}

fn colsum_into(m: &Matrix, out: &mut [f64]) {
    out.fill(0.0);
    colsum_into_add(m, out);
}

fn colsum_into_add(m: &Matrix, out: &mut [f64]) {
    for i in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
}

fn normalize_decoder_columns(w_dec: &mut Matrix) {
    let (d, dict) = (w_dec.rows(), w_dec.cols());
    for j in 0..dict {
        let mut norm = 0.0;
        for i in 0..d {
            let v = w_dec.get(i, j);
            norm += v * v;
        }
        let norm = norm.sqrt();
        if norm > 0.0 {
            for i in 0..d {
                w_dec.set(i, j, w_dec.get(i, j) / norm);
            }
        }
    }
}

struct SaeAdam {
    t: u64,
    m_enc: Vec<f64>,
    v_enc: Vec<f64>,
    m_benc: Vec<f64>,
    v_benc: Vec<f64>,
    m_dec: Vec<f64>,
    v_dec: Vec<f64>,
    m_bpre: Vec<f64>,
    v_bpre: Vec<f64>,
}

impl SaeAdam {
    fn new(sae: &SaeModel) -> Self {
        SaeAdam {
            t: 0,
            m_enc: vec![0.0; sae.w_enc.data().len()],
            v_enc: vec![0.0; sae.w_enc.data().len()],
            m_benc: vec![0.0; sae.b_enc.len()],
            v_benc: vec![0.0; sae.b_enc.len()],
            m_dec: vec![0.0; sae.w_dec.data().len()],
            v_dec: vec![0.0; sae.w_dec.data().len()],
            m_bpre: vec![0.0; sae.b_pre.len()],
            v_bpre: vec![0.0; sae.b_pre.len()],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        sae: &mut SaeModel,
        dw_enc: &Matrix,
        db_enc: &[f64],
        dw_dec: &Matrix,
        db_pre: &[f64],
        lr: f64,
        betas: (f64, f64, f64),
    ) {
        self.t += 1;
        let bc1 = 1.0 - betas.0.powi(self.t as i32);
        let bc2 = 1.0 - betas.1.powi(self.t as i32);
        adam_update(
            sae.w_enc.data_mut(),
            dw_enc.data(),
            &mut self.m_enc,
            &mut self.v_enc,
            betas,
            lr,
            bc1,
            bc2,
        );
        adam_update(
            sae.b_enc.as_mut_slice(),
            db_enc,
            &mut self.m_benc,
            &mut self.v_benc,
            betas,
            lr,
            bc1,
            bc2,
        );
        adam_update(
            sae.w_dec.data_mut(),
            dw_dec.data(),
            &mut self.m_dec,
            &mut self.v_dec,
            betas,
            lr,
            bc1,
            bc2,
        );
        adam_update(
            sae.b_pre.as_mut_slice(),
            db_pre,
            &mut self.m_bpre,
            &mut self.v_bpre,
            betas,
            lr,
            bc1,
            bc2,
        );
    }
}

// ── Evaluation ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaeEvalReport {
    /// Mean squared reconstruction error in standardized space.
    pub mse: f64,
    /// Mean count of nonzero code entries per sample.
    pub mean_l0: f64,
    /// Fraction of latents that never activated over the eval set.
    pub dead_fraction: f64,
    pub per_sample_l0: Vec<u32>,
}

/// Reconstruction and sparsity statistics of an SAE over a dataset.
pub fn eval_sae(sae: &SaeModel, ds: &ActivationDataset) -> SaeEvalReport {
    assert_eq!(ds.dim(), sae.input_dim, "eval dimension mismatch");
    let z = sae.encode_batch(&ds.data, None);
    let xhat = sae.decode_batch(&z);
    let n = ds.n_samples();
    let d = sae.input_dim;
    let mut mse = 0.0;
    for (a, b) in xhat.data().iter().zip(ds.data.data()) {
        mse += (a - b) * (a - b);
    }
    mse /= (n * d) as f64;
    let mut per_sample_l0 = Vec::with_capacity(n);
    let mut ever_active = vec![false; sae.dict_size];
    for i in 0..n {
        let mut l0 = 0u32;
        for (j, zv) in z.row(i).iter().enumerate() {
            if *zv != 0.0 {
                l0 += 1;
                ever_active[j] = true;
            }
        }
        per_sample_l0.push(l0);
    }
    let mean_l0 = per_sample_l0.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let dead = ever_active.iter().filter(|a| !**a).count();
    SaeEvalReport {
        mse,
        mean_l0,
        dead_fraction: dead as f64 / sae.dict_size as f64,
        per_sample_l0,
    }
}

/// mean_L0(adversarial) / mean_L0(clean). Both datasets must carry identical
/// standardization statistics (the clean stats applied to both).
pub fn l0_ratio(
    sae: &SaeModel,
    clean: &ActivationDataset,
    adversarial: &ActivationDataset,
) -> Result<f64> {
    if clean.dim() != adversarial.dim() || clean.dim() != sae.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "l0_ratio dims: sae {}, clean {}, adversarial {}",
            sae.input_dim,
            clean.dim(),
            adversarial.dim()
        )));
    }
    match (&clean.standardization, &adversarial.standardization) {
        (Some(a), Some(b)) if a == b => {}
        _ => {
            return Err(Error::ShapeMismatch(
                "clean and adversarial datasets must share identical standardization stats".into(),
            ))
        }
    }
    let clean_l0 = eval_sae(sae, clean).mean_l0;
    if clean_l0 == 0.0 {
        return Err(Error::ZeroCleanL0);
    }
    let adv_l0 = eval_sae(sae, adversarial).mean_l0;
    Ok(adv_l0 / clean_l0)
}

// ── Tests ────────────────────────────────────────────────────────────────────
