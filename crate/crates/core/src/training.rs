//! Standard and adversarial training loops for toy models.
//!
//! Adversarial training minimizes the mixture α·L(x) + (1−α)·L(x_adv) with
//! attacks generated on the fly each step; the perturbation is treated as a
//! constant input (no differentiation through the attack). Every run draws a
//! fresh i.i.d. batch per step.
//!
//! Reproducibility: `(seed, config)` fully determines the output model
//! bitwise. Separate RNG streams per purpose (init / batches / attack noise /
//! final eval) keep the α = 1 adversarial trajectory identical to the
//! standard one whether or not attacks are computed.

use crate::attacks::{
    elhage_attack_batch, gradient_l2_attack_batch, resolve_epsilon, AttackConfig, AttackVariant,
};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};
use crate::toymodel::{fill_batch, BatchScratch, ModelGradients, ToyModel};
use serde::{Deserialize, Serialize};

// Per-purpose RNG stream ids under the config seed.
const STREAM_INIT: u64 = 0;
const STREAM_BATCH: u64 = 1;
const STREAM_ATTACK: u64 = 2;
const STREAM_EVAL: u64 = 3;
const STREAM_EVAL_ATTACK: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Mixture weight on the clean loss term (adversarial training only).
    pub alpha: f64,
    pub attack: Option<AttackConfig>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::standard_defaults()
    }
}

impl TrainConfig {
    /// Defaults for standard training: 20k steps, lr 1e-3, batch 1024, Adam.
    pub fn standard_defaults() -> Self {
        TrainConfig {
            steps: 20_000,
            learning_rate: 1e-3,
            batch_size: 1024,
            optimizer: Optimizer::default(),
            alpha: 1.0,
            attack: None,
            seed: 0,
        }
    }

    /// Defaults for adversarial training: 150k steps, α = 0.5, gradient
    /// attack at ε = 0.1·‖x‖₂.
    pub fn adversarial_defaults() -> Self {
        TrainConfig {
            steps: 150_000,
            learning_rate: 1e-3,
            batch_size: 1024,
            optimizer: Optimizer::default(),
            alpha: 0.5,
            attack: Some(AttackConfig::default()),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be > 0".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if let Some(atk) = &self.attack {
            atk.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub clean_loss: f64,
    pub adv_loss: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_clean_loss: f64,
    pub final_adv_loss: Option<f64>,
    pub loss_curve: Vec<CurvePoint>,
    pub wall_steps: usize,
}

/// Progress hook: (step, clean loss, adv loss). Called at curve-sampling
/// cadence and on the final step.
pub type ProgressFn<'a> = &'a (dyn Fn(usize, f64, Option<f64>) + Sync);

/// Train on clean batches only. `cfg.attack` must be `None`.
pub fn train_standard(
    cfg: &TrainConfig,
    n_features: usize,
    n_hidden: usize,
    density: f64,
    progress: Option<ProgressFn>,
) -> Result<(ToyModel, TrainReport)> {
    if cfg.attack.is_some() {
        return Err(Error::InvalidConfig(
            "standard training takes no attack config".into(),
        ));
    }
    run_training(cfg, n_features, n_hidden, density, progress)
}

/// Train on the clean/adversarial mixture. `cfg.attack` must be present.
pub fn train_adversarial(
    cfg: &TrainConfig,
    n_features: usize,
    n_hidden: usize,
    density: f64,
    progress: Option<ProgressFn>,
) -> Result<(ToyModel, TrainReport)> {
    if cfg.attack.is_none() {
        return Err(Error::InvalidConfig(
            "adversarial training requires an attack config".into(),
        ));
    }
    run_training(cfg, n_features, n_hidden, density, progress)
}

fn attack_training_batch(
    model: &ToyModel,
    x: &Matrix,
    atk: &AttackConfig,
    eps: f64,
    rng: &mut Rng,
    scratch: &mut BatchScratch,
) -> Matrix {
    match atk.variant {
        AttackVariant::Gradient => {
            gradient_l2_attack_batch(model, x, eps, atk.noise_scale, rng, scratch)
        }
        AttackVariant::Elhage => elhage_attack_batch(model, x, eps),
        AttackVariant::Random => {
            let mut adv = x.clone();
            if eps > 0.0 {
                for i in 0..adv.rows() {
                    let u = rng.unit_sphere(x.cols());
                    for (a, uv) in adv.row_mut(i).iter_mut().zip(u.as_slice()) {
                        *a += eps * uv;
                    }
                }
            }
            adv
        }
    }
}

fn run_training(
    cfg: &TrainConfig,
    n_features: usize,
    n_hidden: usize,
    density: f64,
    progress: Option<ProgressFn>,
) -> Result<(ToyModel, TrainReport)> {
    cfg.validate()?;
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidDensity(density));
    }

    let mut init_rng = Rng::new(cfg.seed, STREAM_INIT);
    let mut batch_rng = Rng::new(cfg.seed, STREAM_BATCH);
    let mut attack_rng = Rng::new(cfg.seed, STREAM_ATTACK);

    let mut model = ToyModel::init_random(n_features, n_hidden, &mut init_rng);
    let mut opt = OptimizerState::new(&cfg.optimizer, &model);

    // With α = 1 the adversarial term has weight zero; skipping the attack
    // leaves the trajectory identical because noise uses its own stream.
    let adversarial = cfg.attack.is_some() && cfg.alpha < 1.0;

    let mut x = Matrix::zeros(cfg.batch_size, n_features);
    let mut scratch = BatchScratch::default();
    let mut grads = ModelGradients::zeros_like(&model);
    let mut grads_adv = ModelGradients::zeros_like(&model);

    let curve_every = (cfg.steps / 128).max(1);
    let mut curve = Vec::new();

    for step in 0..cfg.steps {
        fill_batch(&mut batch_rng, &mut x, density);

        let (clean_loss, adv_loss) = if adversarial {
            let atk = cfg.attack.as_ref().unwrap();
            let clean_loss = if cfg.alpha > 0.0 {
                model.loss_and_grad(&x, &mut scratch, &mut grads)
            } else {
                0.0 // weight zero; skipped
            };
            let eps = resolve_epsilon(&x, atk.epsilon_fraction)?;
            let x_adv = attack_training_batch(&model, &x, atk, eps, &mut attack_rng, &mut scratch);
            let adv_loss = model.loss_and_grad(&x_adv, &mut scratch, &mut grads_adv);
            if cfg.alpha > 0.0 {
                mix_into(&mut grads, &grads_adv, cfg.alpha);
            } else {
                std::mem::swap(&mut grads, &mut grads_adv);
            }
            (clean_loss, Some(adv_loss))
        } else {
            (model.loss_and_grad(&x, &mut scratch, &mut grads), None)
        };

        let objective = cfg.alpha * clean_loss + (1.0 - cfg.alpha) * adv_loss.unwrap_or(clean_loss);
        if !objective.is_finite() {
            return Err(Error::Divergence { step, loss: objective });
        }

        if step % curve_every == 0 || step + 1 == cfg.steps {
            let clean = if adversarial && cfg.alpha == 0.0 {
                // Not computed in the backward pass; evaluate for the curve.
                model.loss_matrix(&x)
            } else {
                clean_loss
            };
            curve.push(CurvePoint {
                step,
                clean_loss: clean,
                adv_loss,
            });
            if let Some(hook) = progress {
                hook(step, clean, adv_loss);
            }
        }

        opt.step(&mut model, &grads, cfg.learning_rate);
    }

    if !(model.w.all_finite() && model.b.all_finite()) {
        return Err(Error::Divergence {
            step: cfg.steps,
            loss: f64::NAN,
        });
    }

    // Final evaluation on a fresh batch from a dedicated stream.
    let mut eval_rng = Rng::new(cfg.seed, STREAM_EVAL);
    let mut eval_x = Matrix::zeros(cfg.batch_size, n_features);
    fill_batch(&mut eval_rng, &mut eval_x, density);
    let final_clean_loss = model.loss_matrix(&eval_x);
    let final_adv_loss = match &cfg.attack {
        Some(atk) => {
            let eps = resolve_epsilon(&eval_x, atk.epsilon_fraction)?;
            let mut eval_attack_rng = Rng::new(cfg.seed, STREAM_EVAL_ATTACK);
            let x_adv = attack_training_batch(
                &model,
                &eval_x,
                atk,
                eps,
                &mut eval_attack_rng,
                &mut scratch,
            );
            Some(model.loss_matrix(&x_adv))
        }
        None => None,
    };

    let report = TrainReport {
        final_clean_loss,
        final_adv_loss,
        loss_curve: curve,
        wall_steps: cfg.steps,
    };
    Ok((model, report))
}

/// grads = alpha·grads + (1−alpha)·grads_adv
fn mix_into(grads: &mut ModelGradients, grads_adv: &ModelGradients, alpha: f64) {
    for (g, ga) in grads.dw.data_mut().iter_mut().zip(grads_adv.dw.data()) {
        *g = alpha * *g + (1.0 - alpha) * ga;
    }
    for (g, ga) in grads
        .db
        .as_mut_slice()
        .iter_mut()
        .zip(grads_adv.db.as_slice())
    {
        *g = alpha * *g + (1.0 - alpha) * ga;
    }
}

// ── Optimizers ───────────────────────────────────────────────────────────────

enum OptimizerState {
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        t: u64,
        mw: Vec<f64>,
        vw: Vec<f64>,
        mb: Vec<f64>,
        vb: Vec<f64>,
    },
    Sgd,
}

impl OptimizerState {
    fn new(opt: &Optimizer, model: &ToyModel) -> Self {
        match *opt {
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => OptimizerState::Adam {
                beta1,
                beta2,
                epsilon,
                t: 0,
                mw: vec![0.0; model.w.data().len()],
                vw: vec![0.0; model.w.data().len()],
                mb: vec![0.0; model.b.len()],
                vb: vec![0.0; model.b.len()],
            },
            Optimizer::Sgd => OptimizerState::Sgd,
        }
    }

    fn step(&mut self, model: &mut ToyModel, grads: &ModelGradients, lr: f64) {
        match self {
            OptimizerState::Adam {
                beta1,
                beta2,
                epsilon,
                t,
                mw,
                vw,
                mb,
                vb,
            } => {
                *t += 1;
                let bc1 = 1.0 - beta1.powi(*t as i32);
                let bc2 = 1.0 - beta2.powi(*t as i32);
                adam_update(
                    model.w.data_mut(),
                    grads.dw.data(),
                    mw,
                    vw,
                    (*beta1, *beta2, *epsilon),
                    lr,
                    bc1,
                    bc2,
                );
                adam_update(
                    model.b.as_mut_slice(),
                    grads.db.as_slice(),
                    mb,
                    vb,
                    (*beta1, *beta2, *epsilon),
                    lr,
                    bc1,
                    bc2,
                );
            }
            OptimizerState::Sgd => {
                for (p, g) in model.w.data_mut().iter_mut().zip(grads.dw.data()) {
                    *p -= lr * g;
                }
                for (p, g) in model.b.as_mut_slice().iter_mut().zip(grads.db.as_slice()) {
                    *p -= lr * g;
                }
            }
        }
    }
}

pub(crate) fn adam_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    (beta1, beta2, epsilon): (f64, f64, f64),
    lr: f64,
    bias_corr1: f64,
    bias_corr2: f64,
) {
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let mhat = m[i] / bias_corr1;
        let vhat = v[i] / bias_corr2;
        param[i] -= lr * mhat / (vhat.sqrt() + epsilon);
    }
}

// ── Tests ────────────────────────────────────────────────────────────────────
