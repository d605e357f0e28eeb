//! Bit-exact persistence formats and exporters.
//!
//! Checkpoints (`.splb`): magic "SPLB", format version u32, model kind u32
//! (1 = toy, 2 = sae), a kind-specific shape header, the parameter payload as
//! little-endian f64 in documented order (toy: W row-major then b; SAE:
//! W_enc, b_enc, W_dec, b_pre, then optional standardization stats and the
//! dead-latent counters), and a trailing CRC32 (IEEE) over every preceding
//! byte.
//!
//! Activation dumps (`.spac`): magic "SPAC", version u32, n_samples u64,
//! dim u64, row-major little-endian f32 payload, trailing CRC32. The f32
//! payload is the external interchange convention; values are widened to f64
//! on load.
//!
//! All file writes go through a write-temp-then-rename so partially written
//! artifacts are never observed at the final path.

use crate::error::{Error, Result};
use crate::metrics::InterferenceGraph;
use crate::numkit::{Matrix, Vector};
use crate::sae::{ActivationDataset, SaeModel, SaeVariant, StandardizeMode, StandardizeStats};
use crate::toymodel::ToyModel;
use std::io::Write;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SPLB";
pub const ACTIVATION_MAGIC: &[u8; 4] = b"SPAC";
pub const FORMAT_VERSION: u32 = 1;

const KIND_TOY: u32 = 1;
const KIND_SAE: u32 = 2;

// ── Atomic writes ────────────────────────────────────────────────────────────

/// Write bytes to `path` via a temp file in the same directory plus rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-partial");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Serialize any value as pretty JSON and write it atomically.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("json serialization failed: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::ConfigParse(format!("{}: {}", path.display(), e))
    })
}

// ── Little-endian buffer plumbing ────────────────────────────────────────────

struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, vs: &[f64]) {
        for v in vs {
            self.f64(*v);
        }
    }

    /// Append the CRC of everything so far and return the finished buffer.
    fn finish_with_crc(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8], path: &Path) -> Self {
        ByteReader {
            buf,
            pos: 0,
            path: path.display().to_string(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Truncated {
                path: self.path.clone(),
                detail: format!("while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n * 8, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Validate the trailing CRC32 and return the body it covers.
fn check_crc<'a>(bytes: &'a [u8], path: &Path) -> Result<&'a [u8]> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            path: path.display().to_string(),
            detail: "shorter than a checksum".into(),
        });
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::CrcMismatch {
            path: path.display().to_string(),
            stored,
            computed,
        });
    }
    Ok(body)
}

fn check_header(r: &mut ByteReader, magic: &'static [u8; 4], expected_name: &'static str) -> Result<()> {
    let got = r.take(4, "magic bytes")?;
    if got != magic {
        return Err(Error::BadMagic {
            path: r.path.clone(),
            expected: expected_name,
        });
    }
    let version = r.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: r.path.clone(),
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    Ok(())
}

// ── Toy-model checkpoints ────────────────────────────────────────────────────

pub fn save_toy_checkpoint(path: &Path, model: &ToyModel) -> Result<()> {
    let mut w = ByteWriter::new();
    w.buf.extend_from_slice(CHECKPOINT_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(KIND_TOY);
    w.u64(model.n_features as u64);
    w.u64(model.n_hidden as u64);
    w.f64_slice(model.w.data());
    w.f64_slice(model.b.as_slice());
    atomic_write(path, &w.finish_with_crc())
}

pub fn load_toy_checkpoint(path: &Path) -> Result<ToyModel> {
    let bytes = std::fs::read(path)?;
    let body = check_crc(&bytes, path)?;
    let mut r = ByteReader::new(body, path);
    check_header(&mut r, CHECKPOINT_MAGIC, "SPLB")?;
    let kind = r.u32("model kind")?;
    if kind != KIND_TOY {
        return Err(Error::WrongKind {
            path: r.path,
            expected: "toy",
            found: kind_name(kind),
        });
    }
    let n = r.u64("n_features")? as usize;
    let m = r.u64("n_hidden")? as usize;
    let w = Matrix::from_vec(m, n, r.f64_vec(m * n, "W payload")?);
    let b = Vector::from_vec(r.f64_vec(n, "b payload")?);
    Ok(ToyModel::new(w, b))
}

fn kind_name(kind: u32) -> String {
    match kind {
        KIND_TOY => "toy".into(),
        KIND_SAE => "sae".into(),
        other => format!("unknown({other})"),
    }
}

// ── SAE checkpoints ──────────────────────────────────────────────────────────

pub fn save_sae_checkpoint(path: &Path, sae: &SaeModel) -> Result<()> {
    let mut w = ByteWriter::new();
    w.buf.extend_from_slice(CHECKPOINT_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u32(KIND_SAE);
    w.u64(sae.input_dim as u64);
    w.u64(sae.dict_size as u64);
    match sae.variant {
        SaeVariant::TopK { k, k_aux, aux_weight } => {
            w.u32(1);
            w.u64(k as u64);
            w.u64(k_aux as u64);
            w.f64(aux_weight);
            w.f64(0.0);
        }
        SaeVariant::L1 { lambda } => {
            w.u32(2);
            w.u64(0);
            w.u64(0);
            w.f64(0.0);
            w.f64(lambda);
        }
    }
    match &sae.standardization {
        Some(stats) => {
            w.u8(1);
            w.u8(match stats.mode {
                StandardizeMode::PerDimension => 0,
                StandardizeMode::GlobalScalar => 1,
            });
        }
        None => {
            w.u8(0);
            w.u8(0);
        }
    }
    w.f64_slice(sae.w_enc.data());
    w.f64_slice(sae.b_enc.as_slice());
    w.f64_slice(sae.w_dec.data());
    w.f64_slice(sae.b_pre.as_slice());
    if let Some(stats) = &sae.standardization {
        w.f64_slice(stats.mean.as_slice());
        w.f64_slice(stats.std.as_slice());
    }
    for steps in &sae.dead_steps {
        w.u64(*steps);
    }
    atomic_write(path, &w.finish_with_crc())
}

pub fn load_sae_checkpoint(path: &Path) -> Result<SaeModel> {
    let bytes = std::fs::read(path)?;
    let body = check_crc(&bytes, path)?;
    let mut r = ByteReader::new(body, path);
    check_header(&mut r, CHECKPOINT_MAGIC, "SPLB")?;
    let kind = r.u32("model kind")?;
    if kind != KIND_SAE {
        return Err(Error::WrongKind {
            path: r.path,
            expected: "sae",
            found: kind_name(kind),
        });
    }
    let d = r.u64("input_dim")? as usize;
    let dict = r.u64("dict_size")? as usize;
    let tag = r.u32("variant tag")?;
    let k = r.u64("k")? as usize;
    let k_aux = r.u64("k_aux")? as usize;
    let aux_weight = r.f64("aux_weight")?;
    let lambda = r.f64("lambda")?;
    let variant = match tag {
        1 => SaeVariant::TopK { k, k_aux, aux_weight },
        2 => SaeVariant::L1 { lambda },
        other => {
            return Err(Error::WrongKind {
                path: r.path,
                expected: "top-k or l1 sae variant",
                found: format!("variant tag {other}"),
            })
        }
    };
    let has_stats = r.u8("stats flag")? == 1;
    let mode = match r.u8("stats mode")? {
        1 => StandardizeMode::GlobalScalar,
        _ => StandardizeMode::PerDimension,
    };
    let w_enc = Matrix::from_vec(dict, d, r.f64_vec(dict * d, "W_enc payload")?);
    let b_enc = Vector::from_vec(r.f64_vec(dict, "b_enc payload")?);
    let w_dec = Matrix::from_vec(d, dict, r.f64_vec(d * dict, "W_dec payload")?);
    let b_pre = Vector::from_vec(r.f64_vec(d, "b_pre payload")?);
    let standardization = if has_stats {
        let mean = Vector::from_vec(r.f64_vec(d, "stats mean")?);
        let std = Vector::from_vec(r.f64_vec(d, "stats std")?);
        Some(StandardizeStats { mean, std, mode })
    } else {
        None
    };
    let mut dead_steps = Vec::with_capacity(dict);
    for _ in 0..dict {
        dead_steps.push(r.u64("dead-latent counters")?);
    }
    Ok(SaeModel {
        input_dim: d,
        dict_size: dict,
        w_enc,
        b_enc,
        w_dec,
        b_pre,
        variant,
        dead_steps,
        standardization,
    })
}

// ── Activation dumps ─────────────────────────────────────────────────────────

pub fn write_activation_dump(path: &Path, ds: &ActivationDataset) -> Result<()> {
    let mut w = ByteWriter::new();
    w.buf.extend_from_slice(ACTIVATION_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u64(ds.n_samples() as u64);
    w.u64(ds.dim() as u64);
    for v in ds.data.data() {
        w.buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    atomic_write(path, &w.finish_with_crc())
}

/// Read an externally produced activation dump. Standardization is never
/// stored in dumps; apply it at use time.
pub fn read_activation_dump(path: &Path) -> Result<ActivationDataset> {
    let bytes = std::fs::read(path)?;
    let body = check_crc(&bytes, path)?;
    let mut r = ByteReader::new(body, path);
    check_header(&mut r, ACTIVATION_MAGIC, "SPAC")?;
    let n = r.u64("n_samples")? as usize;
    let d = r.u64("dim")? as usize;
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset(r.path));
    }
    let raw = r.take(n * d * 4, "f32 payload")?;
    let data: Vec<f64> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(ActivationDataset::new(
        Matrix::from_vec(n, d, data),
        path.display().to_string(),
    ))
}

// ── DOT export ───────────────────────────────────────────────────────────────

/// Render an interference graph as Graphviz DOT: node labels are feature
/// ids, fill intensity encodes the activation overlay (orange, alpha scaled
/// by highlight), and penwidth scales with edge weight.
pub fn graph_to_dot(graph: &InterferenceGraph) -> String {
    let max_w = graph
        .edges
        .iter()
        .map(|e| e.w)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut out = String::from("graph interference {\n");
    out.push_str("  node [shape=circle style=filled fontsize=9 fixedsize=true width=0.3];\n");
    for node in &graph.nodes {
        let alpha = (node.highlight.clamp(0.0, 1.0) * 255.0).round() as u8;
        out.push_str(&format!(
            "  {} [fillcolor=\"#ff8c00{:02x}\"];\n",
            node.id, alpha
        ));
    }
    for edge in &graph.edges {
        let penwidth = 0.3 + 5.0 * edge.w / max_w;
        out.push_str(&format!(
            "  {} -- {} [penwidth={:.3}];\n",
            edge.i, edge.j, penwidth
        ));
    }
    out.push_str("}\n");
    out
}

/// Write a matrix as CSV (plain numeric grid); used for interference
/// heatmaps.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut text = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

// ── Tests ────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::build_graph;
    use crate::numkit::Rng;
    use crate::sae::{standardize, SaeTrainConfig};
    use crate::toymodel::sample_batch;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn random_model(seed: u64) -> ToyModel {
        let mut rng = Rng::new(seed, 0);
        ToyModel::init_random(10, 4, &mut rng)
    }

    #[test]
    fn crc32_known_vector() {
        // IEEE CRC32 of "123456789".
        assert_eq!(crc32fast::hash(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn toy_checkpoint_roundtrip_bitwise() {
        let dir = tmpdir();
        let path = dir.path().join("m.splb");
        let model = random_model(1);
        save_toy_checkpoint(&path, &model).unwrap();
        let loaded = load_toy_checkpoint(&path).unwrap();
        assert_eq!(model.w, loaded.w);
        assert_eq!(model.b, loaded.b);
        // No temp file left behind.
        assert!(!path.with_extension("tmp-partial").exists());
    }

    #[test]
    fn toy_checkpoint_corrupt_byte_fails_crc() {
        let dir = tmpdir();
        let path = dir.path().join("m.splb");
        save_toy_checkpoint(&path, &random_model(2)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_toy_checkpoint(&path),
            Err(Error::CrcMismatch { .. })
        ));
    }

    #[test]
    fn toy_checkpoint_future_version_rejected() {
        let dir = tmpdir();
        let path = dir.path().join("m.splb");
        save_toy_checkpoint(&path, &random_model(3)).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Bump the version field (offset 4) and refresh the CRC.
        bytes[4] = FORMAT_VERSION as u8 + 1;
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_toy_checkpoint(&path),
            Err(Error::UnsupportedVersion { found, .. }) if found == FORMAT_VERSION + 1
        ));
    }

    #[test]
    fn toy_checkpoint_truncation_detected() {
        let dir = tmpdir();
        let path = dir.path().join("m.splb");
        save_toy_checkpoint(&path, &random_model(4)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        // Either the CRC or the payload length will complain.
        match load_toy_checkpoint(&path) {
            Err(Error::CrcMismatch { .. }) | Err(Error::Truncated { .. }) => {}
            other => panic!("expected corruption error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn toy_checkpoint_bad_magic() {
        let dir = tmpdir();
        let path = dir.path().join("m.splb");
        let mut w = ByteWriter::new();
        w.buf.extend_from_slice(b"NOPE");
        w.u32(FORMAT_VERSION);
        atomic_write(&path, &w.finish_with_crc()).unwrap();
        assert!(matches!(
            load_toy_checkpoint(&path),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn sae_checkpoint_roundtrip_both_variants() {
        let dir = tmpdir();
        let mut rng = Rng::new(5, 0);
        let mut data = Matrix::zeros(64, 6);
        rng.fill_gaussian(data.data_mut(), 0.0, 1.0);
        let ds = standardize(&ActivationDataset::new(data, "t")).unwrap();
        for (name, variant) in [
            ("topk.splb", SaeVariant::TopK { k: 3, k_aux: 8, aux_weight: 1.0 }),
            ("l1.splb", SaeVariant::L1 { lambda: 3e-4 }),
        ] {
            let cfg = SaeTrainConfig {
                variant,
                steps: 50,
                learning_rate: 1e-3,
                batch_size: 32,
                expansion_factor: 4,
                dead_threshold_steps: 10,
                seed: 6,
            };
            let sae = crate::sae::train_sae(&ds, &cfg, None).unwrap();
            let path = dir.path().join(name);
            save_sae_checkpoint(&path, &sae).unwrap();
            let loaded = load_sae_checkpoint(&path).unwrap();
            assert_eq!(sae, loaded);
        }
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let dir = tmpdir();
        let path = dir.path().join("m.splb");
        save_toy_checkpoint(&path, &random_model(7)).unwrap();
        assert!(matches!(
            load_sae_checkpoint(&path),
            Err(Error::WrongKind { expected: "sae", .. })
        ));
    }

    #[test]
    fn activation_dump_roundtrip_f32_precision() {
        let dir = tmpdir();
        let path = dir.path().join("a.spac");
        let mut rng = Rng::new(8, 0);
        let mut data = Matrix::zeros(20, 5);
        rng.fill_gaussian(data.data_mut(), 0.0, 3.0);
        let ds = ActivationDataset::new(data, "synthetic");
        write_activation_dump(&path, &ds).unwrap();
        let loaded = read_activation_dump(&path).unwrap();
        assert_eq!(loaded.n_samples(), 20);
        assert_eq!(loaded.dim(), 5);
        for (a, b) in ds.data.data().iter().zip(loaded.data.data()) {
            assert_eq!(*a as f32, *b as f32); // equal within f32 precision
        }
    }

    #[test]
    fn activation_dump_zero_samples_rejected() {
        let dir = tmpdir();
        let path = dir.path().join("a.spac");
        let ds = ActivationDataset::new(Matrix::zeros(0, 4), "empty");
        write_activation_dump(&path, &ds).unwrap();
        assert!(matches!(
            read_activation_dump(&path),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn activation_dump_crc_detects_flip() {
        let dir = tmpdir();
        let path = dir.path().join("a.spac");
        let ds = ActivationDataset::new(Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]), "t");
        write_activation_dump(&path, &ds).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[20] ^= 1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_activation_dump(&path),
            Err(Error::CrcMismatch { .. })
        ));
    }

    #[test]
    fn dot_export_structure() {
        let mut rng = Rng::new(9, 0);
        let model = ToyModel::init_random(5, 2, &mut rng);
        let graph = build_graph(&model, 0.0, 0.0);
        let dot = graph_to_dot(&graph);
        assert!(dot.starts_with("graph interference {"));
        assert!(dot.ends_with("}\n"));
        assert_eq!(dot.matches(" -- ").count(), graph.edges.len());
        assert_eq!(dot.matches("fillcolor").count(), graph.nodes.len());
        assert!(dot.contains("penwidth="));
    }

    #[test]
    fn json_roundtrip_graph_schema() {
        let dir = tmpdir();
        let path = dir.path().join("g.json");
        let mut rng = Rng::new(10, 0);
        let model = ToyModel::init_random(6, 3, &mut rng);
        let graph = build_graph(&model, 0.0, 1e-4);
        write_json(&path, &graph).unwrap();
        let loaded: InterferenceGraph = read_json(&path).unwrap();
        assert_eq!(graph, loaded);
        // Field spelling pinned by the documented schema.
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["\"nodes\"", "\"edges\"", "\"id\"", "\"norm2\"", "\"highlight\"", "\"i\"", "\"j\"", "\"w\""] {
            assert!(text.contains(key), "missing {key}");
        }
    }

    #[test]
    fn matrix_csv_grid() {
        let dir = tmpdir();
        let path = dir.path().join("m.csv");
        let m = Matrix::from_rows(&[&[1.0, 2.5], &[-3.0, 0.25]]);
        write_matrix_csv(&path, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "1,2.5\n-3,0.25\n");
    }

    #[test]
    fn dump_then_standardize_then_use() {
        // The documented external-ingestion path: raw dump → read →
        // standardize → dimensions check at eval time (not load time).
        let dir = tmpdir();
        let path = dir.path().join("ext.spac");
        let model = random_model(11);
        let mut rng = Rng::new(12, 0);
        let batch = sample_batch(&mut rng, 50, 10, 0.5).unwrap();
        let ds = crate::sae::collect_activations_from_batch(&model, &batch);
        write_activation_dump(&path, &ds).unwrap();
        let loaded = read_activation_dump(&path).unwrap();
        let std_ds = standardize(&loaded).unwrap();
        assert_eq!(std_ds.dim(), 4);
        assert!(std_ds.standardization.is_some());
    }
}
