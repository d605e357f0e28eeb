//! Experiment orchestration: density sweeps with standard and adversarially
//! trained models, vulnerability evaluation against a shared dense baseline,
//! interference-exploitation analysis, and number-line report bundles.
//!
//! Every sweep point derives its seeds from the master seed and its grid
//! index, so results are independent of scheduling; rows are gathered and
//! sorted by (density desc, robust flag) regardless of completion order.
//! Checkpoints persist as they finish and reruns skip training for any point
//! whose checkpoint already exists (guarded by a config fingerprint in the
//! output directory), which makes long sweeps resumable.
//!
//! Per-row training failures are recorded in the manifest and skipped; the
//! sweep only fails outright if its baseline row (the highest-density
//! standard model) cannot be produced.

use crate::attacks::{attack_batch, gradient_l2_attack_batch, relative_vulnerability, AttackConfig, AttackVariant};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{
    build_graph, features_per_dimension, highlight_active_interference, interference_matrix,
    mean_highlight, mean_offdiag_interference, InterferenceGraph, DEFAULT_EDGE_THRESHOLD,
    DEFAULT_NODE_THRESHOLD,
};
use crate::numkit::{mix_seed, Rng, Vector};
use crate::toymodel::{sample_batch, BatchScratch, FeatureBatch, ToyModel};
use crate::training::{train_adversarial, train_standard, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

// Seed-derivation purpose tags (arbitrary distinct constants).
const PURPOSE_ROW: u64 = 0x01;
const PURPOSE_EVAL_BATCH: u64 = 0x02;
const PURPOSE_EVAL_ATTACK: u64 = 0x03;

/// Fully resolved sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Strictly decreasing densities in (0, 1].
    pub densities: Vec<f64>,
    pub n_features: usize,
    pub n_hidden: usize,
    pub standard: TrainConfig,
    /// When present, each density also gets an adversarially trained model.
    pub adversarial: Option<TrainConfig>,
    /// Attack used for vulnerability evaluation.
    pub eval_attack: AttackConfig,
    pub eval_batch_size: usize,
    pub master_seed: u64,
}

impl SweepSpec {
    /// The paper-scale default: 30 log-spaced densities from 1.0 to 0.1,
    /// n = 100 features into m = 20 hidden dimensions.
    pub fn default_standard() -> Self {
        SweepSpec {
            densities: crate::config::log_spaced(30, 1.0, 0.1),
            n_features: 100,
            n_hidden: 20,
            standard: TrainConfig::standard_defaults(),
            adversarial: None,
            eval_attack: AttackConfig::default(),
            eval_batch_size: 1024,
            master_seed: 0,
        }
    }

    /// Build from a declarative run config; `paired` adds the adversarial
    /// member per density.
    pub fn from_run_config(cfg: &RunConfig, paired: bool) -> Result<Self> {
        let mut standard = cfg.standard_train;
        standard.attack = None;
        let spec = SweepSpec {
            densities: cfg.sweep.resolve_densities()?,
            n_features: cfg.model.n_features,
            n_hidden: cfg.model.n_hidden,
            standard,
            adversarial: paired.then(|| cfg.adversarial_train.to_train_config()),
            eval_attack: cfg.attack,
            eval_batch_size: cfg.sweep.eval_batch_size,
            master_seed: cfg.sweep.master_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.densities.is_empty() {
            return Err(Error::InvalidConfig("density grid is empty".into()));
        }
        for d in &self.densities {
            if !(*d > 0.0 && *d <= 1.0) {
                return Err(Error::InvalidDensity(*d));
            }
        }
        for w in self.densities.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::InvalidConfig(format!(
                    "densities must be strictly decreasing; saw {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if self.n_features == 0 || self.n_hidden == 0 {
            return Err(Error::InvalidConfig("model shape must be nonzero".into()));
        }
        if self.eval_batch_size == 0 {
            return Err(Error::InvalidConfig("eval_batch_size must be > 0".into()));
        }
        self.standard.validate()?;
        if self.standard.attack.is_some() {
            return Err(Error::InvalidConfig(
                "the standard training config must not carry an attack".into(),
            ));
        }
        if let Some(adv) = &self.adversarial {
            adv.validate()?;
            if adv.attack.is_none() {
                return Err(Error::InvalidConfig(
                    "the adversarial training config needs an attack".into(),
                ));
            }
        }
        self.eval_attack.validate()?;
        Ok(())
    }

    /// Stable fingerprint for resume-safety checks.
    pub fn fingerprint(&self) -> u32 {
        let text = serde_json::to_string(self).expect("spec serializes");
        crc32fast::hash(text.as_bytes())
    }
}

/// One trained-and-evaluated model of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub density: f64,
    pub features_per_dimension: f64,
    pub clean_loss: f64,
    pub adv_loss: f64,
    pub relative_vulnerability: f64,
    pub mean_offdiag: f64,
    pub trained_robust: bool,
    pub seed: u64,
    /// Checkpoint path relative to the sweep output directory.
    pub checkpoint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowFailure {
    pub density: f64,
    pub trained_robust: bool,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepManifest {
    pub library_version: String,
    pub spec: SweepSpec,
    pub spec_fingerprint: u32,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<RowFailure>,
    pub csv: String,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<RowFailure>,
    pub out_dir: PathBuf,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub const SWEEP_CSV_HEADER: &str =
    "density,seed,robust,features_per_dimension,clean_loss,adv_loss,relative_vulnerability,mean_offdiag,checkpoint";

/// Run (or resume) a sweep, persisting checkpoints, a CSV table, and a JSON
/// manifest under `out_dir`.
pub fn run_sweep(spec: &SweepSpec, out_dir: &Path) -> Result<SweepOutput> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    guard_fingerprint(spec, out_dir)?;

    // Work list: (grid index, density, robust?).
    let mut points: Vec<(usize, f64, bool)> = Vec::new();
    for (i, &d) in spec.densities.iter().enumerate() {
        points.push((i, d, false));
        if spec.adversarial.is_some() {
            points.push((i, d, true));
        }
    }

    let results: Vec<(usize, bool, Result<EvaluatedModel>)> = points
        .par_iter()
        .map(|&(i, density, robust)| {
            let res = train_or_load_point(spec, out_dir, i, density, robust)
                .and_then(|(model, ckpt)| evaluate_point(spec, i, density, &model, &ckpt));
            (i, robust, res)
        })
        .collect();

    // Locate the baseline: highest density (grid index 0), standard member.
    let mut baseline_vuln = None;
    for (i, robust, res) in &results {
        if *i == 0 && !robust {
            match res {
                Ok(ev) => baseline_vuln = Some(ev.adv_loss),
                Err(e) => {
                    return Err(Error::Sweep(format!(
                        "baseline row (density {}) failed: {e}",
                        spec.densities[0]
                    )))
                }
            }
        }
    }
    let baseline_vuln = baseline_vuln.ok_or_else(|| Error::Sweep("baseline row missing".into()))?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, robust, res) in results {
        let density = spec.densities[i];
        match res {
            Ok(ev) => rows.push(SweepRow {
                density,
                features_per_dimension: ev.fpd,
                clean_loss: ev.clean_loss,
                adv_loss: ev.adv_loss,
                relative_vulnerability: relative_vulnerability(ev.adv_loss, baseline_vuln)?,
                mean_offdiag: ev.mean_offdiag,
                trained_robust: robust,
                seed: ev.seed,
                checkpoint: ev.checkpoint,
            }),
            Err(e) => failures.push(RowFailure {
                density,
                trained_robust: robust,
                error: e.to_string(),
            }),
        }
    }
    // Deterministic order: density descending, standard before robust.
    rows.sort_by(|a, b| {
        b.density
            .partial_cmp(&a.density)
            .unwrap()
            .then(a.trained_robust.cmp(&b.trained_robust))
    });
    failures.sort_by(|a, b| {
        b.density
            .partial_cmp(&a.density)
            .unwrap()
            .then(a.trained_robust.cmp(&b.trained_robust))
    });

    let csv_path = out_dir.join("sweep.csv");
    io::atomic_write(&csv_path, rows_to_csv(&rows).as_bytes())?;
    let manifest = SweepManifest {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        spec_fingerprint: spec.fingerprint(),
        rows: rows.clone(),
        failures: failures.clone(),
        csv: "sweep.csv".into(),
    };
    let manifest_path = out_dir.join("manifest.json");
    io::write_json(&manifest_path, &manifest)?;

    Ok(SweepOutput {
        rows,
        failures,
        out_dir: out_dir.to_path_buf(),
        csv_path,
        manifest_path,
    })
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut text = String::from(SWEEP_CSV_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.density,
            r.seed,
            r.trained_robust as u8,
            r.features_per_dimension,
            r.clean_loss,
            r.adv_loss,
            r.relative_vulnerability,
            r.mean_offdiag,
            r.checkpoint
        ));
    }
    text
}

pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SWEEP_CSV_HEADER => {}
        other => {
            return Err(Error::ConfigParse(format!(
                "unexpected sweep CSV header: {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::ConfigParse(format!(
                "sweep CSV line {} has {} fields",
                ln + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::ConfigParse(format!("line {}: {e}", ln + 2)))
        };
        rows.push(SweepRow {
            density: parse_f(fields[0])?,
            seed: fields[1]
                .parse()
                .map_err(|e| Error::ConfigParse(format!("line {}: {e}", ln + 2)))?,
            trained_robust: fields[2] == "1",
            features_per_dimension: parse_f(fields[3])?,
            clean_loss: parse_f(fields[4])?,
            adv_loss: parse_f(fields[5])?,
            relative_vulnerability: parse_f(fields[6])?,
            mean_offdiag: parse_f(fields[7])?,
            checkpoint: fields[8].to_string(),
        });
    }
    Ok(rows)
}

fn guard_fingerprint(spec: &SweepSpec, out_dir: &Path) -> Result<()> {
    #[derive(Serialize, Deserialize)]
    struct Meta {
        spec_fingerprint: u32,
    }
    let meta_path = out_dir.join("sweep.meta.json");
    let fp = spec.fingerprint();
    if meta_path.exists() {
        let meta: Meta = io::read_json(&meta_path)?;
        if meta.spec_fingerprint != fp {
            return Err(Error::Sweep(format!(
                "{} holds artifacts of a different sweep (fingerprint {:#010x} != {:#010x}); \
                 use a fresh output directory",
                out_dir.display(),
                meta.spec_fingerprint,
                fp
            )));
        }
    } else {
        io::write_json(&meta_path, &Meta { spec_fingerprint: fp })?;
    }
    Ok(())
}

struct EvaluatedModel {
    fpd: f64,
    clean_loss: f64,
    adv_loss: f64,
    mean_offdiag: f64,
    seed: u64,
    checkpoint: String,
}

fn checkpoint_name(index: usize, robust: bool) -> String {
    format!(
        "ckpt_{index:02}_{}.splb",
        if robust { "adv" } else { "std" }
    )
}

/// Seed shared by both members of a pair: differences between the standard
/// and robust model are then attributable to the objective, not the init.
fn row_seed(spec: &SweepSpec, index: usize) -> u64 {
    mix_seed(spec.master_seed, (index as u64) << 8 | PURPOSE_ROW)
}

fn train_or_load_point(
    spec: &SweepSpec,
    out_dir: &Path,
    index: usize,
    density: f64,
    robust: bool,
) -> Result<(ToyModel, String)> {
    let name = checkpoint_name(index, robust);
    let path = out_dir.join(&name);
    if path.exists() {
        // Resume: the fingerprint guard already vouched for config equality.
        return Ok((io::load_toy_checkpoint(&path)?, name));
    }
    let seed = row_seed(spec, index);
    let model = if robust {
        let mut cfg = spec.adversarial.clone().expect("robust point needs adversarial config");
        cfg.seed = seed;
        train_adversarial(&cfg, spec.n_features, spec.n_hidden, density, None)?.0
    } else {
        let mut cfg = spec.standard;
        cfg.seed = seed;
        train_standard(&cfg, spec.n_features, spec.n_hidden, density, None)?.0
    };
    io::save_toy_checkpoint(&path, &model)?;
    Ok((model, name))
}

fn evaluate_point(
    spec: &SweepSpec,
    index: usize,
    density: f64,
    model: &ToyModel,
    checkpoint: &str,
) -> Result<EvaluatedModel> {
    // Both members of a pair share the evaluation batch (derived from the
    // grid index only) so their vulnerabilities are comparable.
    let mut eval_rng = Rng::new(
        mix_seed(spec.master_seed, (index as u64) << 8 | PURPOSE_EVAL_BATCH),
        0,
    );
    let batch = sample_batch(&mut eval_rng, spec.eval_batch_size, spec.n_features, density)?;
    let mut attack_rng = Rng::new(
        mix_seed(spec.master_seed, (index as u64) << 8 | PURPOSE_EVAL_ATTACK),
        0,
    );
    let outcome = attack_batch(model, &batch, &spec.eval_attack, &mut attack_rng)?;
    let gram = interference_matrix(model);
    Ok(EvaluatedModel {
        fpd: features_per_dimension(model),
        clean_loss: outcome.clean_loss,
        adv_loss: outcome.adv_loss,
        mean_offdiag: mean_offdiag_interference(&gram),
        seed: row_seed(spec, index),
        checkpoint: checkpoint.to_string(),
    })
}

// ── Paired robustness experiment ─────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDelta {
    pub density: f64,
    pub fpd_standard: f64,
    pub fpd_robust: f64,
    /// fpd_standard − fpd_robust (positive = robustness reduced superposition).
    pub fpd_reduction: f64,
    pub vuln_standard: f64,
    pub vuln_robust: f64,
    pub rel_vuln_standard: f64,
    pub rel_vuln_robust: f64,
    pub mean_offdiag_standard: f64,
    pub mean_offdiag_robust: f64,
}

#[derive(Debug)]
pub struct PairedOutput {
    pub sweep: SweepOutput,
    pub pairs: Vec<PairDelta>,
    pub pairs_path: PathBuf,
}

/// Paired sweep: per density, a standard and an adversarially trained model
/// sharing data seeds, with per-pair deltas persisted as `pairs.json`.
pub fn run_paired_robustness_experiment(spec: &SweepSpec, out_dir: &Path) -> Result<PairedOutput> {
    if spec.adversarial.is_none() {
        return Err(Error::InvalidConfig(
            "paired experiment requires an adversarial training config".into(),
        ));
    }
    let sweep = run_sweep(spec, out_dir)?;
    let mut pairs = Vec::new();
    for chunk in sweep.rows.chunks(2) {
        if chunk.len() != 2 || chunk[0].trained_robust || !chunk[1].trained_robust {
            continue; // a member failed; recorded under failures
        }
        let (s, r) = (&chunk[0], &chunk[1]);
        if s.density != r.density {
            continue;
        }
        pairs.push(PairDelta {
            density: s.density,
            fpd_standard: s.features_per_dimension,
            fpd_robust: r.features_per_dimension,
            fpd_reduction: s.features_per_dimension - r.features_per_dimension,
            vuln_standard: s.adv_loss,
            vuln_robust: r.adv_loss,
            rel_vuln_standard: s.relative_vulnerability,
            rel_vuln_robust: r.relative_vulnerability,
            mean_offdiag_standard: s.mean_offdiag,
            mean_offdiag_robust: r.mean_offdiag,
        });
    }
    let pairs_path = out_dir.join("pairs.json");
    io::write_json(&pairs_path, &pairs)?;
    Ok(PairedOutput {
        sweep,
        pairs,
        pairs_path,
    })
}

// ── Interference exploitation analysis ───────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlayStats {
    pub nonrobust_clean: f64,
    pub nonrobust_adv: f64,
    pub robust_clean: f64,
    pub robust_adv: f64,
}

/// Fig-3-style quadruple: the interference graph of each model highlighted
/// under one clean input and under its per-model adversarial counterpart,
/// plus both interference heatmaps and batch-averaged overlay statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploitationReport {
    pub nonrobust_clean: InterferenceGraph,
    pub nonrobust_adv: InterferenceGraph,
    pub robust_clean: InterferenceGraph,
    pub robust_adv: InterferenceGraph,
    /// Mean over the whole batch of the per-input mean node overlay.
    pub overlay_stats: OverlayStats,
}

pub fn analyze_interference_exploitation(
    model: &ToyModel,
    robust_model: &ToyModel,
    batch: &FeatureBatch,
    cfg: &AttackConfig,
    rng: &mut Rng,
) -> Result<ExploitationReport> {
    if model.n_features != robust_model.n_features || model.n_hidden != robust_model.n_hidden {
        return Err(Error::ShapeMismatch(format!(
            "models disagree: {}x{} vs {}x{}",
            model.n_hidden, model.n_features, robust_model.n_hidden, robust_model.n_features
        )));
    }
    if batch.batch_size() == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut report = ExploitationReport {
        nonrobust_clean: InterferenceGraph { nodes: vec![], edges: vec![] },
        nonrobust_adv: InterferenceGraph { nodes: vec![], edges: vec![] },
        robust_clean: InterferenceGraph { nodes: vec![], edges: vec![] },
        robust_adv: InterferenceGraph { nodes: vec![], edges: vec![] },
        overlay_stats: OverlayStats {
            nonrobust_clean: 0.0,
            nonrobust_adv: 0.0,
            robust_clean: 0.0,
            robust_adv: 0.0,
        },
    };
    for (which, m) in [(0usize, model), (1usize, robust_model)] {
        let graph = build_graph(m, DEFAULT_NODE_THRESHOLD, DEFAULT_EDGE_THRESHOLD);
        let eps = crate::attacks::resolve_epsilon(&batch.data, cfg.epsilon_fraction)?;
        let x_adv = match cfg.variant {
            AttackVariant::Gradient => {
                let mut scratch = BatchScratch::default();
                gradient_l2_attack_batch(m, &batch.data, eps, cfg.noise_scale, rng, &mut scratch)
            }
            AttackVariant::Elhage => crate::attacks::elhage_attack_batch(m, &batch.data, eps),
            AttackVariant::Random => {
                let mut adv = batch.data.clone();
                for i in 0..adv.rows() {
                    let u = rng.unit_sphere(adv.cols());
                    for (a, uv) in adv.row_mut(i).iter_mut().zip(u.as_slice()) {
                        *a += eps * uv;
                    }
                }
                adv
            }
        };
        // Representative input: the first batch example.
        let x0 = Vector::from_slice(batch.data.row(0));
        let x0_adv = Vector::from_slice(x_adv.row(0));
        let clean_graph = highlight_active_interference(&graph, m, &x0);
        let adv_graph = highlight_active_interference(&graph, m, &x0_adv);
        // Batch-averaged overlay statistic.
        let mut clean_mean = 0.0;
        let mut adv_mean = 0.0;
        for i in 0..batch.batch_size() {
            let xc = Vector::from_slice(batch.data.row(i));
            let xa = Vector::from_slice(x_adv.row(i));
            clean_mean += mean_highlight(&highlight_active_interference(&graph, m, &xc));
            adv_mean += mean_highlight(&highlight_active_interference(&graph, m, &xa));
        }
        clean_mean /= batch.batch_size() as f64;
        adv_mean /= batch.batch_size() as f64;
        if which == 0 {
            report.nonrobust_clean = clean_graph;
            report.nonrobust_adv = adv_graph;
            report.overlay_stats.nonrobust_clean = clean_mean;
            report.overlay_stats.nonrobust_adv = adv_mean;
        } else {
            report.robust_clean = clean_graph;
            report.robust_adv = adv_graph;
            report.overlay_stats.robust_clean = clean_mean;
            report.overlay_stats.robust_adv = adv_mean;
        }
    }
    Ok(report)
}

/// Export the exploitation quadruple as DOT files plus interference heatmap
/// CSVs, with the report JSON alongside.
pub fn export_exploitation_report(
    report: &ExploitationReport,
    model: &ToyModel,
    robust_model: &ToyModel,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    for (name, graph) in [
        ("nonrobust_clean", &report.nonrobust_clean),
        ("nonrobust_adv", &report.nonrobust_adv),
        ("robust_clean", &report.robust_clean),
        ("robust_adv", &report.robust_adv),
    ] {
        io::atomic_write(
            &out_dir.join(format!("{name}.dot")),
            io::graph_to_dot(graph).as_bytes(),
        )?;
    }
    io::write_matrix_csv(
        &out_dir.join("heatmap_nonrobust.csv"),
        &interference_matrix(model),
    )?;
    io::write_matrix_csv(
        &out_dir.join("heatmap_robust.csv"),
        &interference_matrix(robust_model),
    )?;
    io::write_json(&out_dir.join("exploitation.json"), report)?;
    Ok(())
}

// ── Superposition number line ────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberLinePoint {
    pub density: f64,
    pub fpd_standard: f64,
    pub fpd_robust: Option<f64>,
    pub rel_vuln_standard: f64,
    pub rel_vuln_robust: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedGraphs {
    pub density: f64,
    pub standard: InterferenceGraph,
    pub robust: Option<InterferenceGraph>,
}

/// Ordered scatter of features-per-dimension with pair-connecting segments
/// (implicit in the point pairs) and per-selected-density embedded graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberLineReport {
    pub points: Vec<NumberLinePoint>,
    pub graphs: Vec<SelectedGraphs>,
}

/// Build the number-line bundle from sweep rows. `selected` densities get
/// embedded interference graphs (checkpoints are resolved against
/// `sweep_dir`); the JSON report plus one DOT file per selected model land in
/// `report_dir`.
pub fn superposition_number_line(
    rows: &[SweepRow],
    selected: &[f64],
    sweep_dir: &Path,
    report_dir: &Path,
) -> Result<NumberLineReport> {
    std::fs::create_dir_all(report_dir)?;
    let mut points: Vec<NumberLinePoint> = Vec::new();
    for row in rows.iter().filter(|r| !r.trained_robust) {
        let robust = rows
            .iter()
            .find(|r| r.trained_robust && r.density == row.density);
        points.push(NumberLinePoint {
            density: row.density,
            fpd_standard: row.features_per_dimension,
            fpd_robust: robust.map(|r| r.features_per_dimension),
            rel_vuln_standard: row.relative_vulnerability,
            rel_vuln_robust: robust.map(|r| r.relative_vulnerability),
        });
    }

    let mut graphs = Vec::new();
    for (si, target) in selected.iter().enumerate() {
        let row = rows
            .iter()
            .filter(|r| !r.trained_robust)
            .min_by(|a, b| {
                (a.density - target)
                    .abs()
                    .partial_cmp(&(b.density - target).abs())
                    .unwrap()
            })
            .ok_or_else(|| Error::Sweep("no standard rows to select from".into()))?;
        let density = row.density;
        let std_model = io::load_toy_checkpoint(&sweep_dir.join(&row.checkpoint))?;
        let std_graph = build_graph(&std_model, DEFAULT_NODE_THRESHOLD, DEFAULT_EDGE_THRESHOLD);
        io::atomic_write(
            &report_dir.join(format!("graph_{si:02}_std.dot")),
            io::graph_to_dot(&std_graph).as_bytes(),
        )?;
        let robust_graph = match rows
            .iter()
            .find(|r| r.trained_robust && r.density == density)
        {
            Some(r) => {
                let m = io::load_toy_checkpoint(&sweep_dir.join(&r.checkpoint))?;
                let g = build_graph(&m, DEFAULT_NODE_THRESHOLD, DEFAULT_EDGE_THRESHOLD);
                io::atomic_write(
                    &report_dir.join(format!("graph_{si:02}_adv.dot")),
                    io::graph_to_dot(&g).as_bytes(),
                )?;
                Some(g)
            }
            None => None,
        };
        graphs.push(SelectedGraphs {
            density,
            standard: std_graph,
            robust: robust_graph,
        });
    }

    let report = NumberLineReport { points, graphs };
    io::write_json(&report_dir.join("number_line.json"), &report)?;
    Ok(report)
}

// ── Statistics helpers ───────────────────────────────────────────────────────

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "correlation length mismatch");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    pearson(&rx, &ry)
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided exact sign test p-value for `pos` successes out of
/// `pos + neg` non-tied trials under the fair-coin null.
pub fn sign_test_p_two_sided(pos: usize, neg: usize) -> f64 {
    let n = pos + neg;
    if n == 0 {
        return 1.0;
    }
    let k = pos.min(neg);
    // Tail P(X <= k) for X ~ Binomial(n, 1/2), doubled and capped.
    let mut tail = 0.0f64;
    for i in 0..=k {
        tail += binomial_coeff(n, i);
    }
    let p = 2.0 * tail / 2f64.powi(n as i32);
    p.min(1.0)
}

fn binomial_coeff(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

// ── Tests ────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_perfect_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert!((pearson(&xs, &ys) - 1.0).abs() < 1e-12);
        let neg = [8.0, 6.0, 4.0, 2.0];
        assert!((pearson(&xs, &neg) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_monotone_nonlinear() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.0, 8.0, 27.0, 64.0, 125.0];
        assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties() {
        let xs = [1.0, 1.0, 2.0, 3.0];
        let ranks = average_ranks(&xs);
        assert_eq!(ranks, vec![1.5, 1.5, 3.0, 4.0]);
    }

    #[test]
    fn sign_test_exact_values() {
        // 8/8 one-direction: p = 2/256.
        assert!((sign_test_p_two_sided(8, 0) - 2.0 / 256.0).abs() < 1e-12);
        // 10 of 12: 2·(C(12,0)+C(12,1)+C(12,2))/4096 = 2·79/4096.
        assert!((sign_test_p_two_sided(10, 2) - 2.0 * 79.0 / 4096.0).abs() < 1e-12);
        // Even split is not significant.
        assert!(sign_test_p_two_sided(3, 3) > 0.99);
        assert_eq!(sign_test_p_two_sided(0, 0), 1.0);
    }

    #[test]
    fn spec_validation_rejects_bad_grids() {
        let mut spec = SweepSpec::default_standard();
        spec.densities = vec![];
        assert!(spec.validate().is_err());
        let mut spec = SweepSpec::default_standard();
        spec.densities = vec![0.5, 0.5];
        assert!(spec.validate().is_err());
        let mut spec = SweepSpec::default_standard();
        spec.densities = vec![0.2, 0.5];
        assert!(spec.validate().is_err());
        let mut spec = SweepSpec::default_standard();
        spec.densities = vec![1.5, 0.5];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let rows = vec![
            SweepRow {
                density: 1.0,
                features_per_dimension: 1.01,
                clean_loss: 0.001,
                adv_loss: 0.002,
                relative_vulnerability: 1.0,
                mean_offdiag: 0.05,
                trained_robust: false,
                seed: 42,
                checkpoint: "ckpt_00_std.splb".into(),
            },
            SweepRow {
                density: 0.5,
                features_per_dimension: 1.7,
                clean_loss: 0.003,
                adv_loss: 0.009,
                relative_vulnerability: 4.5,
                mean_offdiag: 0.12,
                trained_robust: true,
                seed: 43,
                checkpoint: "ckpt_01_adv.splb".into(),
            },
        ];
        let text = rows_to_csv(&rows);
        let back = rows_from_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].density, 1.0);
        assert_eq!(back[1].trained_robust, true);
        assert_eq!(back[1].relative_vulnerability, 4.5);
        // Lossless float round-trip via shortest representation.
        assert_eq!(back[0].features_per_dimension, 1.01);
    }
}
