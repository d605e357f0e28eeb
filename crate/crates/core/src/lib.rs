//! splab: a desk-scale laboratory for studying how superposition and
//! adversarial vulnerability interact in toy ReLU autoencoders.
//!
//! The crate trains toy models across feature-sparsity sweeps, attacks them
//! with L2-bounded perturbations, adversarially trains robust counterparts,
//! quantifies superposition (features per dimension, interference matrices
//! and graphs), and trains sparse autoencoders on hidden activations to
//! measure how attacks exploit feature interference.
//!
//! Module map:
//! - [`numkit`]: dense f64 matrices/vectors, counter-based RNG, finite
//!   differences.
//! - [`toymodel`]: the ReLU toy autoencoder, data generation, loss, and
//!   closed-form gradients.
//! - [`attacks`]: gradient, analytic per-feature, and random-baseline L2
//!   attacks plus vulnerability statistics.
//! - [`training`]: standard and adversarial (mixture-loss) training loops.
//! - [`metrics`]: superposition metrics and interference graphs.
//! - [`sae`]: TopK and L1 sparse autoencoders over activation datasets.
//! - [`experiments`]: sweep orchestration, paired robustness experiments,
//!   interference-exploitation analysis, report bundles.
//! - [`io`]: binary checkpoint / activation-dump formats, DOT export, atomic
//!   file writes.
//! - [`config`]: declarative run configuration (TOML).

pub mod attacks;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod numkit;
pub mod sae;
pub mod toymodel;
pub mod training;

pub use error::{Error, Result};
