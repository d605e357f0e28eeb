//! Operational error type shared across the crate.
//!
//! Shape contract violations inside the math kernels panic; everything that
//! can be triggered by user-supplied configuration, data files, or runtime
//! behavior (divergence, checksums, degenerate statistics) surfaces here.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid density {0}; must be in (0, 1]")]
    InvalidDensity(f64),

    #[error("batch must contain at least one example")]
    EmptyBatch,

    #[error("training diverged at step {step} (loss = {loss})")]
    Divergence { step: usize, loss: f64 },

    #[error("degenerate baseline vulnerability {0}; ratio undefined")]
    DegenerateBaseline(f64),

    #[error("dataset must be standardized first")]
    NotStandardized,

    #[error("standardization needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("clean mean L0 is zero; L0 ratio undefined")]
    ZeroCleanL0,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("{path}: bad magic bytes (expected {expected})")]
    BadMagic { path: String, expected: &'static str },

    #[error("{path}: unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { path: String, found: u32, supported: u32 },

    #[error("{path}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { path: String, stored: u32, computed: u32 },

    #[error("{path}: file truncated ({detail})")]
    Truncated { path: String, detail: String },

    #[error("{path}: wrong checkpoint kind (expected {expected}, found {found})")]
    WrongKind { path: String, expected: &'static str, found: String },

    #[error("{0}: dataset contains zero samples")]
    EmptyDataset(String),

    #[error("sweep failed: {0}")]
    Sweep(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
