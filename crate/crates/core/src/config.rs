//! Declarative run configuration: one TOML document covering model shape,
//! training, attack, sweep, and SAE settings.
//!
//! Every field has an explicit default (printed by `config print-defaults`),
//! unknown keys are rejected, and a round-trip through TOML is lossless, so
//! a printed default config reproduces identical runs when fed back in.

use crate::attacks::AttackConfig;
use crate::error::{Error, Result};
use crate::sae::SaeTrainConfig;
use crate::training::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelShapeConfig {
    pub n_features: usize,
    pub n_hidden: usize,
}

impl Default for ModelShapeConfig {
    fn default() -> Self {
        ModelShapeConfig {
            n_features: 100,
            n_hidden: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    /// Number of log-spaced densities when `densities` is not given.
    pub n_densities: usize,
    pub density_max: f64,
    pub density_min: f64,
    /// Explicit density grid (strictly decreasing); overrides the log grid.
    pub densities: Option<Vec<f64>>,
    pub eval_batch_size: usize,
    pub master_seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            n_densities: 30,
            density_max: 1.0,
            density_min: 0.1,
            densities: None,
            eval_batch_size: 1024,
            master_seed: 0,
        }
    }
}

impl SweepSettings {
    /// The density grid this config denotes: explicit list if present, else
    /// log-spaced from max down to min.
    pub fn resolve_densities(&self) -> Result<Vec<f64>> {
        if let Some(d) = &self.densities {
            return Ok(d.clone());
        }
        if self.n_densities == 0 {
            return Err(Error::InvalidConfig("n_densities must be > 0".into()));
        }
        if !(self.density_min > 0.0 && self.density_max <= 1.0 && self.density_min <= self.density_max) {
            return Err(Error::InvalidConfig(format!(
                "density range [{}, {}] must satisfy 0 < min <= max <= 1",
                self.density_min, self.density_max
            )));
        }
        Ok(log_spaced(self.n_densities, self.density_max, self.density_min))
    }
}

/// `count` points from `hi` down to `lo`, uniform in log space.
pub fn log_spaced(count: usize, hi: f64, lo: f64) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let lh = hi.ln();
    let ll = lo.ln();
    (0..count)
        .map(|i| (lh + (ll - lh) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Full declarative experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelShapeConfig,
    pub standard_train: TrainConfig,
    pub adversarial_train: AdversarialTrainSection,
    /// Attack used for vulnerability evaluation.
    pub attack: AttackConfig,
    pub sweep: SweepSettings,
    pub sae: SaeTrainConfig,
}

/// Adversarial training section; like [`TrainConfig`] but the attack is
/// mandatory, so it is stored inline rather than as an option.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversarialTrainSection {
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: crate::training::Optimizer,
    pub alpha: f64,
    pub attack: AttackConfig,
    pub seed: u64,
}

impl Default for AdversarialTrainSection {
    fn default() -> Self {
        let t = TrainConfig::adversarial_defaults();
        AdversarialTrainSection {
            steps: t.steps,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            optimizer: t.optimizer,
            alpha: t.alpha,
            attack: t.attack.unwrap(),
            seed: t.seed,
        }
    }
}

impl AdversarialTrainSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            alpha: self.alpha,
            attack: Some(self.attack),
            seed: self.seed,
        }
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("RunConfig serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::ConfigParse(msg) => Error::ConfigParse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Stable 32-bit fingerprint of the canonical TOML form; recorded in run
    /// manifests so resumed sweeps can detect config changes.
    pub fn fingerprint(&self) -> u32 {
        crc32fast::hash(self.to_toml().as_bytes())
    }
}

// ── Tests ────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.fingerprint(), back.fingerprint());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[model]\nn_features = 10\nn_bogus = 3\n";
        assert!(matches!(
            RunConfig::from_toml(text),
            Err(Error::ConfigParse(_))
        ));
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::from_toml("[model]\nn_features = 64\n").unwrap();
        assert_eq!(cfg.model.n_features, 64);
        assert_eq!(cfg.model.n_hidden, 20);
        assert_eq!(cfg.standard_train.steps, 20_000);
        assert_eq!(cfg.adversarial_train.steps, 150_000);
    }

    #[test]
    fn log_grid_endpoints_and_monotonicity() {
        let d = log_spaced(30, 1.0, 0.1);
        assert_eq!(d.len(), 30);
        assert!((d[0] - 1.0).abs() < 1e-12);
        assert!((d[29] - 0.1).abs() < 1e-12);
        for w in d.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn explicit_densities_override_grid() {
        let mut s = SweepSettings::default();
        s.densities = Some(vec![0.5, 0.2]);
        assert_eq!(s.resolve_densities().unwrap(), vec![0.5, 0.2]);
    }

    #[test]
    fn resolve_rejects_bad_ranges() {
        let mut s = SweepSettings::default();
        s.density_min = 0.0;
        assert!(s.resolve_densities().is_err());
        let mut s = SweepSettings::default();
        s.n_densities = 0;
        assert!(s.resolve_densities().is_err());
    }
}
