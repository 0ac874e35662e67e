//! ECG beat analysis with a memory-augmented adversarial autoencoder for
//! anomaly detection and a multi-branch classifier for arrhythmia types.

pub mod classifier;
pub mod config;
pub mod data;
pub mod error;
pub mod gan;
pub mod memory;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod signal;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};

/// Samples per segmented beat.
pub const BEAT_LEN: usize = 320;
