//! Two-stage anomaly detection for photoplethysmography (PPG) signals.
//!
//! Stage one learns a compact representation of fixed-length PPG windows by
//! training a 1-D convolutional encoder to recognise which of four reversal
//! transforms (time, amplitude, both, none) was applied to a window. Stage
//! two fits unsupervised anomaly scorers (multivariate normal, isolation
//! forest, PCA reconstruction) on the frozen encoder's outputs.
//!
//! Module map:
//! - [`dsp`]: band-pass filtering, normalisation, windowing, resampling
//! - [`augment`]: the four-class transform dataset
//! - [`nn`]: encoder-classifier, gradients, Adam training, checkpoints
//! - [`detectors`]: anomaly scorers and rank-based AUC
//! - [`eval`]: generalized/personalized evaluation protocols and sweeps
//! - [`data`]: manifest ingestion, window archives, synthetic cohorts

pub mod augment;
pub mod data;
pub mod detectors;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod nn;

pub use error::{Error, ErrorCategory, Result};

/// Library version recorded in saved artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
