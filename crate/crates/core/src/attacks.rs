//! L2-bounded adversarial perturbations against toy models, and the
//! vulnerability statistics built on them.
//!
//! Three variants:
//! - `Gradient`: add small Gaussian jitter (to open dead ReLUs), take one
//!   normalized gradient step of length ε.
//! - `Elhage`: per output feature i, the L2 direction maximizing that
//!   feature's pre-activation is row i of WᵀW; enumerate ±ε along every such
//!   direction and keep the candidate with the worst loss.
//! - `Random`: ε times a uniform unit-sphere direction (control condition).
//!
//! ε is resolved as a fraction of the average input norm. Adversarial inputs
//! are not clipped back to [0,1]ⁿ; the attack lives in feature space.
//! Vulnerability is the mean adversarial loss over an evaluation batch, and
//! relative vulnerability divides by a dense-data baseline model's value.

use crate::error::{Error, Result};
use crate::numkit::{norm2, Matrix, Rng, Vector};
use crate::toymodel::{BatchScratch, FeatureBatch, ToyModel};
use serde::{Deserialize, Serialize};

/// Attack family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackVariant {
    /// Noise-then-one-step-gradient L2 attack.
    Gradient,
    /// Analytic per-output-feature attack, worst candidate over ±ε · rowᵢ(WᵀW).
    Elhage,
    /// Uniform random direction on the ε-sphere.
    Random,
}

impl std::fmt::Display for AttackVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttackVariant::Gradient => write!(f, "gradient"),
            AttackVariant::Elhage => write!(f, "elhage"),
            AttackVariant::Random => write!(f, "random"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    /// ε as a fraction of the average input L2 norm.
    pub epsilon_fraction: f64,
    /// Pre-attack Gaussian jitter, relative to ‖x‖₂ (gradient variant only).
    pub noise_scale: f64,
    pub variant: AttackVariant,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon_fraction: 0.10,
            noise_scale: 1e-3,
            variant: AttackVariant::Gradient,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_fraction >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_fraction must be >= 0, got {}",
                self.epsilon_fraction
            )));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise_scale must be >= 0, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

/// Result of attacking a whole evaluation batch.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    /// Perturbed inputs, one row per example (unclipped).
    pub x_adv: Matrix,
    /// Per-example ‖x_adv − x‖₂.
    pub perturbation_norms: Vector,
    pub clean_loss: f64,
    pub adv_loss: f64,
    /// The resolved ε shared by every example.
    pub epsilon: f64,
    /// Gradient variant only: number of examples where the gradient attack
    /// lost to the clean input or to a random ε-sphere candidate (gradient
    /// masking tracking). Always 0 for other variants.
    pub masking_events: usize,
}

/// ε = fraction × mean over the sample of ‖x‖₂.
pub fn resolve_epsilon(sample: &Matrix, epsilon_fraction: f64) -> Result<f64> {
    if sample.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let mean_norm = (0..sample.rows())
        .map(|i| norm2(sample.row(i)))
        .sum::<f64>()
        / sample.rows() as f64;
    Ok(epsilon_fraction * mean_norm)
}

/// One-step gradient L2 attack on a single input. The gradient is evaluated
/// at x plus Gaussian noise with per-coordinate std `noise_scale·‖x‖₂`, then
/// the perturbation ε·g/‖g‖₂ is applied to the original x. Returns x
/// unchanged when ε = 0 or the gradient vanishes.
pub fn gradient_l2_attack(
    model: &ToyModel,
    x: &Vector,
    epsilon: f64,
    noise_scale: f64,
    rng: &mut Rng,
) -> Vector {
    assert!(epsilon >= 0.0, "epsilon must be nonnegative");
    if epsilon == 0.0 {
        return x.clone();
    }
    let mut probe = x.clone();
    if noise_scale > 0.0 {
        let std = noise_scale * x.norm2();
        if std > 0.0 {
            let mut noise = vec![0.0; x.len()];
            rng.fill_gaussian(&mut noise, 0.0, std);
            for (p, nz) in probe.as_mut_slice().iter_mut().zip(&noise) {
                *p += nz;
            }
        }
    }
    let g = model.grad_input(&probe);
    let gn = g.norm2();
    if gn == 0.0 {
        return x.clone();
    }
    let mut adv = x.clone();
    adv.add_scaled(&g, epsilon / gn);
    adv
}

/// Batched gradient attack; one row per example, per-example normalization.
pub fn gradient_l2_attack_batch(
    model: &ToyModel,
    x: &Matrix,
    epsilon: f64,
    noise_scale: f64,
    rng: &mut Rng,
    scratch: &mut BatchScratch,
) -> Matrix {
    assert!(epsilon >= 0.0, "epsilon must be nonnegative");
    if epsilon == 0.0 {
        return x.clone();
    }
    let bsz = x.rows();
    let n = x.cols();
    // Probe point = x + noise (row-scaled), gradient taken there.
    let mut probe = x.clone();
    if noise_scale > 0.0 {
        let mut noise = vec![0.0; n];
        for i in 0..bsz {
            let std = noise_scale * norm2(x.row(i));
            rng.fill_gaussian(&mut noise, 0.0, 1.0);
            for (p, nz) in probe.row_mut(i).iter_mut().zip(&noise) {
                *p += std * nz;
            }
        }
    }
    let mut grad = Matrix::zeros(bsz, n);
    model.grad_input_batch(&probe, scratch, &mut grad);
    let mut adv = x.clone();
    for i in 0..bsz {
        let gn = norm2(grad.row(i));
        if gn > 0.0 {
            let scale = epsilon / gn;
            for (a, g) in adv.row_mut(i).iter_mut().zip(grad.row(i)) {
                *a += scale * g;
            }
        }
    }
    adv
}

/// The ±ε·rowᵢ(WᵀW)/‖rowᵢ(WᵀW)‖₂ candidate directions of the analytic attack.
/// Zero rows contribute no candidates.
fn elhage_directions(model: &ToyModel, epsilon: f64) -> Vec<Vector> {
    let gram = crate::numkit::gram(&model.w);
    let n = model.n_features;
    let mut dirs = Vec::new();
    for i in 0..n {
        let row = gram.row(i);
        let rn = norm2(row);
        if rn > 0.0 {
            let mut d = Vector::zeros(n);
            for (dj, rj) in d.as_mut_slice().iter_mut().zip(row) {
                *dj = epsilon * rj / rn;
            }
            dirs.push(d);
        }
    }
    dirs
}

/// Analytic per-feature attack: evaluate x ± ε·rowᵢ(WᵀW)/‖·‖ for every output
/// feature i and return the candidate with maximal per-example loss (ties go
/// to the earliest candidate). Returns x when W = 0 or ε = 0.
pub fn elhage_analytic_attack(model: &ToyModel, x: &Vector, epsilon: f64) -> Vector {
    assert!(epsilon >= 0.0, "epsilon must be nonnegative");
    if epsilon == 0.0 {
        return x.clone();
    }
    let dirs = elhage_directions(model, epsilon);
    if dirs.is_empty() {
        return x.clone();
    }
    let mut best: Option<(f64, Vector)> = None;
    for d in &dirs {
        for sign in [1.0, -1.0] {
            let mut cand = x.clone();
            cand.add_scaled(d, sign);
            let loss = model.per_example_loss(&cand);
            if best.as_ref().map_or(true, |(bl, _)| loss > *bl) {
                best = Some((loss, cand));
            }
        }
    }
    best.unwrap().1
}

/// Batched analytic attack; candidate-major loop so each candidate is one
/// batched forward pass.
pub fn elhage_attack_batch(model: &ToyModel, x: &Matrix, epsilon: f64) -> Matrix {
    assert!(epsilon >= 0.0, "epsilon must be nonnegative");
    if epsilon == 0.0 {
        return x.clone();
    }
    let dirs = elhage_directions(model, epsilon);
    if dirs.is_empty() {
        return x.clone();
    }
    let bsz = x.rows();
    let mut scratch = BatchScratch::default();
    let mut cand = x.clone();
    let mut losses = Vec::with_capacity(bsz);
    // (best loss, candidate index, sign) per example.
    let mut best: Vec<(f64, usize, f64)> = vec![(f64::NEG_INFINITY, 0, 1.0); bsz];
    for (ci, d) in dirs.iter().enumerate() {
        for sign in [1.0, -1.0] {
            for i in 0..bsz {
                for ((c, xv), dv) in cand.row_mut(i).iter_mut().zip(x.row(i)).zip(d.as_slice()) {
                    *c = xv + sign * dv;
                }
            }
            model.per_example_losses_batch(&cand, &mut scratch, &mut losses);
            for (i, &l) in losses.iter().enumerate() {
                if l > best[i].0 {
                    best[i] = (l, ci, sign);
                }
            }
        }
    }
    let mut adv = x.clone();
    for i in 0..bsz {
        let (_, ci, sign) = best[i];
        for (a, dv) in adv.row_mut(i).iter_mut().zip(dirs[ci].as_slice()) {
            *a += sign * dv;
        }
    }
    adv
}

/// Control condition: x + ε·u for u uniform on the unit sphere.
pub fn random_baseline_attack(x: &Vector, epsilon: f64, rng: &mut Rng) -> Vector {
    assert!(epsilon >= 0.0, "epsilon must be nonnegative");
    if epsilon == 0.0 {
        return x.clone();
    }
    let u = rng.unit_sphere(x.len());
    let mut adv = x.clone();
    adv.add_scaled(&u, epsilon);
    adv
}

fn random_attack_batch(x: &Matrix, epsilon: f64, rng: &mut Rng) -> Matrix {
    let mut adv = x.clone();
    if epsilon == 0.0 {
        return adv;
    }
    for i in 0..x.rows() {
        let u = rng.unit_sphere(x.cols());
        for (a, uv) in adv.row_mut(i).iter_mut().zip(u.as_slice()) {
            *a += epsilon * uv;
        }
    }
    adv
}

/// Attack every example of `batch` under `cfg`, resolving ε from the batch
/// itself. For the gradient variant, each example is also compared against
/// its clean loss and one random ε-sphere candidate; examples where the
/// gradient attack is not the best of the three are counted in
/// `masking_events`.
pub fn attack_batch(
    model: &ToyModel,
    batch: &FeatureBatch,
    cfg: &AttackConfig,
    rng: &mut Rng,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    if batch.batch_size() == 0 {
        return Err(Error::EmptyBatch);
    }
    let x = &batch.data;
    let epsilon = resolve_epsilon(x, cfg.epsilon_fraction)?;
    let mut scratch = BatchScratch::default();

    let x_adv = match cfg.variant {
        AttackVariant::Gradient => {
            gradient_l2_attack_batch(model, x, epsilon, cfg.noise_scale, rng, &mut scratch)
        }
        AttackVariant::Elhage => elhage_attack_batch(model, x, epsilon),
        AttackVariant::Random => random_attack_batch(x, epsilon, rng),
    };

    let mut clean_losses = Vec::new();
    let mut adv_losses = Vec::new();
    model.per_example_losses_batch(x, &mut scratch, &mut clean_losses);
    model.per_example_losses_batch(&x_adv, &mut scratch, &mut adv_losses);

    let mut masking_events = 0;
    if cfg.variant == AttackVariant::Gradient && epsilon > 0.0 {
        let x_rand = random_attack_batch(x, epsilon, rng);
        let mut rand_losses = Vec::new();
        model.per_example_losses_batch(&x_rand, &mut scratch, &mut rand_losses);
        for i in 0..adv_losses.len() {
            if adv_losses[i] < clean_losses[i].max(rand_losses[i]) {
                masking_events += 1;
            }
        }
    }

    let bsz = batch.batch_size();
    let mut norms = Vector::zeros(bsz);
    for i in 0..bsz {
        let d: f64 = x_adv
            .row(i)
            .iter()
            .zip(x.row(i))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        norms[i] = d.sqrt();
    }

    Ok(AttackOutcome {
        x_adv,
        perturbation_norms: norms,
        clean_loss: clean_losses.iter().sum::<f64>() / bsz as f64,
        adv_loss: adv_losses.iter().sum::<f64>() / bsz as f64,
        epsilon,
        masking_events,
    })
}

/// Mean adversarial loss of the model over the batch under `cfg`.
pub fn vulnerability(
    model: &ToyModel,
    eval_batch: &FeatureBatch,
    cfg: &AttackConfig,
    rng: &mut Rng,
) -> Result<f64> {
    Ok(attack_batch(model, eval_batch, cfg, rng)?.adv_loss)
}

/// How many times more vulnerable a model is than the dense-data baseline.
pub fn relative_vulnerability(model_vuln: f64, dense_baseline_vuln: f64) -> Result<f64> {
    if !(dense_baseline_vuln > 0.0) {
        return Err(Error::DegenerateBaseline(dense_baseline_vuln));
    }
    Ok(model_vuln / dense_baseline_vuln)
}

// ── Tests ────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;
    use crate::toymodel::sample_batch;

    fn random_model(seed: u64, n: usize, m: usize) -> ToyModel {
        let mut rng = Rng::new(seed, 0);
        ToyModel::init_random(n, m, &mut rng)
    }

    #[test]
    fn resolve_epsilon_zero_batch() {
        let x = Matrix::zeros(4, 3);
        assert_eq!(resolve_epsilon(&x, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn resolve_epsilon_unit_norm_inputs() {
        let x = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((resolve_epsilon(&x, 0.1).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn resolve_epsilon_empty_errors() {
        let x = Matrix::zeros(0, 3);
        assert!(matches!(resolve_epsilon(&x, 0.1), Err(Error::EmptyBatch)));
    }

    #[test]
    fn resolve_epsilon_matches_direct_mean() {
        // Independent recomputation of 0.1·E‖x‖ over a large sample.
        let mut rng = Rng::new(1, 0);
        let batch = sample_batch(&mut rng, 5000, 100, 0.3).unwrap();
        let eps = resolve_epsilon(&batch.data, 0.1).unwrap();
        let mut mean = 0.0;
        for i in 0..5000 {
            mean += norm2(batch.data.row(i));
        }
        mean /= 5000.0;
        assert!((eps - 0.1 * mean).abs() < 1e-12);
    }

    #[test]
    fn gradient_attack_zero_epsilon_identity() {
        let model = random_model(3, 6, 2);
        let x = Vector::from_slice(&[0.5, 0.0, 0.3, 0.0, 0.9, 0.1]);
        let adv = gradient_l2_attack(&model, &x, 0.0, 1e-3, &mut Rng::new(0, 0));
        assert_eq!(adv, x);
    }

    #[test]
    fn gradient_attack_norm_contract() {
        let model = random_model(5, 8, 3);
        let mut rng = Rng::new(7, 0);
        let batch = sample_batch(&mut rng, 1, 8, 0.8).unwrap();
        let x = Vector::from_slice(batch.data.row(0));
        let adv = gradient_l2_attack(&model, &x, 0.3, 1e-3, &mut rng);
        let mut delta = adv.clone();
        delta.add_scaled(&x, -1.0);
        assert!((delta.norm2() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn gradient_attack_near_grid_optimum_on_tiny_model() {
        // Grid oracle: 10⁴ random unit directions on the ε-sphere. One-step
        // gradient must reach at least 95% of the best grid loss.
        let n = 3;
        let model = random_model(11, n, 1);
        let mut rng = Rng::new(13, 0);
        let batch = sample_batch(&mut rng, 1, n, 0.9).unwrap();
        let x = Vector::from_slice(batch.data.row(0));
        let eps = 0.1 * x.norm2();
        let adv = gradient_l2_attack(&model, &x, eps, 1e-4, &mut rng);
        let attack_loss = model.per_example_loss(&adv);
        let mut grid_best = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let u = rng.unit_sphere(n);
            let mut cand = x.clone();
            cand.add_scaled(&u, eps);
            grid_best = grid_best.max(model.per_example_loss(&cand));
        }
        assert!(
            attack_loss >= 0.95 * grid_best,
            "attack {} vs grid best {}",
            attack_loss,
            grid_best
        );
    }

    #[test]
    fn elhage_zero_weights_returns_input() {
        let model = ToyModel::new(Matrix::zeros(2, 4), Vector::zeros(4));
        let x = Vector::from_slice(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(elhage_analytic_attack(&model, &x, 0.5), x);
    }

    #[test]
    fn elhage_single_feature_direction_parallel_to_row() {
        // Only feature 0 is embedded; the only candidate directions are
        // ±e₀, so the perturbation must be parallel to e₀.
        let mut w = Matrix::zeros(2, 3);
        w.set(0, 0, 1.0);
        let model = ToyModel::new(w, Vector::zeros(3));
        let x = Vector::from_slice(&[0.5, 0.2, 0.1]);
        let adv = elhage_analytic_attack(&model, &x, 0.25);
        assert!((adv[0] - x[0]).abs() > 0.0);
        assert_eq!(adv[1], x[1]);
        assert_eq!(adv[2], x[2]);
    }

    #[test]
    fn elhage_equals_candidate_enumeration() {
        // Exact agreement with an independent enumeration of the 2n signed
        // candidates on a 4-feature, 2-hidden model.
        let model = random_model(17, 4, 2);
        let mut rng = Rng::new(19, 0);
        let batch = sample_batch(&mut rng, 1, 4, 0.9).unwrap();
        let x = Vector::from_slice(batch.data.row(0));
        let eps = 0.2;
        let adv = elhage_analytic_attack(&model, &x, eps);
        let returned = model.per_example_loss(&adv);

        let gram = crate::numkit::gram(&model.w);
        let mut best = f64::NEG_INFINITY;
        for i in 0..4 {
            let rn = norm2(gram.row(i));
            if rn == 0.0 {
                continue;
            }
            for sign in [1.0, -1.0] {
                let mut cand = x.clone();
                for j in 0..4 {
                    cand[j] += sign * eps * gram.get(i, j) / rn;
                }
                best = best.max(model.per_example_loss(&cand));
            }
        }
        assert_eq!(returned, best);
    }

    #[test]
    fn elhage_batch_matches_per_example() {
        let model = random_model(23, 6, 3);
        let mut rng = Rng::new(29, 0);
        let batch = sample_batch(&mut rng, 12, 6, 0.5).unwrap();
        let eps = 0.15;
        let batched = elhage_attack_batch(&model, &batch.data, eps);
        for i in 0..12 {
            let x = Vector::from_slice(batch.data.row(i));
            let single = elhage_analytic_attack(&model, &x, eps);
            for j in 0..6 {
                assert!((batched.get(i, j) - single[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn random_attack_contracts() {
        let x = Vector::from_slice(&[0.4, 0.1, 0.0, 0.6]);
        let mut rng = Rng::new(31, 0);
        assert_eq!(random_baseline_attack(&x, 0.0, &mut rng), x);
        let adv = random_baseline_attack(&x, 0.7, &mut rng);
        let mut delta = adv.clone();
        delta.add_scaled(&x, -1.0);
        assert!((delta.norm2() - 0.7).abs() < 1e-9);
    }

    #[test]
    fn gradient_beats_random_on_most_models() {
        // Sampling oracle: mean random-direction loss vs the gradient attack
        // on the same example, across random sparse models.
        let mut wins = 0;
        let trials = 20;
        for t in 0..trials {
            let model = random_model(100 + t, 12, 4);
            let mut rng = Rng::new(200 + t, 0);
            let batch = sample_batch(&mut rng, 1, 12, 0.3).unwrap();
            let x = Vector::from_slice(batch.data.row(0));
            let eps = 0.1 * (x.norm2() + 0.1);
            let adv = gradient_l2_attack(&model, &x, eps, 1e-3, &mut rng);
            let g_loss = model.per_example_loss(&adv);
            let mut r_mean = 0.0;
            for _ in 0..1000 {
                let r = random_baseline_attack(&x, eps, &mut rng);
                r_mean += model.per_example_loss(&r);
            }
            r_mean /= 1000.0;
            if g_loss >= r_mean {
                wins += 1;
            }
        }
        assert!(wins >= trials * 9 / 10, "gradient won only {}/{}", wins, trials);
    }

    #[test]
    fn vulnerability_zero_epsilon_equals_clean_loss() {
        let model = random_model(37, 10, 4);
        let mut rng = Rng::new(41, 0);
        let batch = sample_batch(&mut rng, 64, 10, 0.4).unwrap();
        let cfg = AttackConfig {
            epsilon_fraction: 0.0,
            ..AttackConfig::default()
        };
        let v = vulnerability(&model, &batch, &cfg, &mut rng).unwrap();
        assert!((v - model.loss(&batch)).abs() < 1e-12);
    }

    #[test]
    fn vulnerability_identity_model_bounded_by_eps_sq() {
        // Perfect reconstruction model: any ε-perturbation changes the
        // per-example loss by at most ε²/n (ReLU clipping only shrinks it).
        let n = 4;
        let model = ToyModel::new(Matrix::identity(n), Vector::zeros(n));
        let mut rng = Rng::new(43, 0);
        let batch = sample_batch(&mut rng, 128, n, 1.0).unwrap();
        let cfg = AttackConfig::default();
        let eps = resolve_epsilon(&batch.data, cfg.epsilon_fraction).unwrap();
        let v = vulnerability(&model, &batch, &cfg, &mut rng).unwrap();
        assert!(
            v <= eps * eps / n as f64 * (1.0 + 1e-9),
            "v = {}, bound = {}",
            v,
            eps * eps / n as f64
        );
    }

    #[test]
    fn vulnerability_monotone_in_epsilon() {
        let model = random_model(47, 10, 3);
        let mut rng = Rng::new(53, 0);
        let batch = sample_batch(&mut rng, 64, 10, 0.4).unwrap();
        let mean_norm = resolve_epsilon(&batch.data, 1.0).unwrap();
        let mut last = f64::NEG_INFINITY;
        for frac in [0.0, 0.05, 0.1, 0.2] {
            // Fixed noise seed: same jitter stream for every ε.
            let mut noise_rng = Rng::new(59, 0);
            let mut scratch = BatchScratch::default();
            let adv = gradient_l2_attack_batch(
                &model,
                &batch.data,
                frac * mean_norm,
                1e-3,
                &mut noise_rng,
                &mut scratch,
            );
            let loss = model.loss_matrix(&adv);
            assert!(
                loss >= last - 1e-12,
                "loss not monotone at frac {}: {} < {}",
                frac,
                loss,
                last
            );
            last = loss;
        }
    }

    #[test]
    fn relative_vulnerability_contracts() {
        assert_eq!(relative_vulnerability(0.05, 0.05).unwrap(), 1.0);
        assert_eq!(relative_vulnerability(0.08, 0.02).unwrap(), 4.0);
        assert!(matches!(
            relative_vulnerability(0.08, 0.0),
            Err(Error::DegenerateBaseline(_))
        ));
    }

    #[test]
    fn perturbation_norm_never_exceeds_epsilon() {
        for (seed, variant) in [
            (61, AttackVariant::Gradient),
            (67, AttackVariant::Elhage),
            (71, AttackVariant::Random),
        ] {
            let model = random_model(seed, 8, 3);
            let mut rng = Rng::new(seed + 1, 0);
            let batch = sample_batch(&mut rng, 32, 8, 0.5).unwrap();
            let cfg = AttackConfig {
                variant,
                ..AttackConfig::default()
            };
            let outcome = attack_batch(&model, &batch, &cfg, &mut rng).unwrap();
            for i in 0..32 {
                assert!(
                    outcome.perturbation_norms[i] <= outcome.epsilon * (1.0 + 1e-9),
                    "{variant}: norm {} > eps {}",
                    outcome.perturbation_norms[i],
                    outcome.epsilon
                );
            }
            assert!(outcome.adv_loss >= 0.0);
        }
    }

    #[test]
    fn masking_counter_fires_on_zero_gradient() {
        // At interior points of a perfect-reconstruction model the input
        // gradient vanishes, so the gradient attack returns x (loss 0).
        // Random ε-sphere candidates occasionally push a coordinate negative,
        // where ReLU clipping creates real loss: classic gradient masking,
        // which the counter must record.
        let n = 4;
        let model = ToyModel::new(Matrix::identity(n), Vector::zeros(n));
        let mut rng = Rng::new(73, 0);
        let batch = sample_batch(&mut rng, 64, n, 1.0).unwrap();
        let cfg = AttackConfig {
            epsilon_fraction: 0.5,
            ..AttackConfig::default()
        };
        let outcome = attack_batch(&model, &batch, &cfg, &mut rng).unwrap();
        assert!(
            outcome.masking_events > 0,
            "masking events {}",
            outcome.masking_events
        );
    }
}
