//! Analysis and control library for object handovers.
//!
//! The pipeline goes from raw 120 Hz force/motion recordings to
//! per-handover metrics, a recurrent grip-release classifier, and
//! weight-adaptive reach trajectories:
//!
//! - [`data`]: canonical on-disk format and validated in-memory types
//! - [`signal`]: Butterworth low-pass, zero-phase filtering, differentiation
//! - [`segmentation`]: cutting sessions into individual handovers
//! - [`features`]: per-handover metrics and dataset statistics
//! - [`model`]: the VAE-LSTM grip-release classifier (from scratch)
//! - [`strategy`]: grip-release decision engines under a 120 Hz tick budget
//! - [`motion`]: minimum-jerk reach planning with per-category accel caps
//! - [`synth`]: synthetic trace generation with planted ground truth

pub mod data;
pub mod error;
pub mod features;
pub mod model;
pub mod motion;
pub mod segmentation;
pub mod signal;
pub mod strategy;
pub mod synth;

pub use error::{Error, Result};

/// Nominal sample rate of all recordings, in Hz.
pub const SAMPLE_RATE_HZ: f64 = 120.0;

/// Fixed length of a segmented handover record, in samples.
pub const RECORD_LEN: usize = 800;

/// Sample index of t = 0 (the grip-force intersection) in a segmented record.
pub const CENTER_INDEX: usize = 400;

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.81;

/// Grip contact/release threshold, newtons.
pub const CONTACT_THRESHOLD_N: f64 = 0.4;

/// Convert a sample index of a centered record to milliseconds relative to t = 0.
pub fn index_to_ms(index: usize) -> f64 {
    (index as f64 - CENTER_INDEX as f64) * 1000.0 / SAMPLE_RATE_HZ
}

/// Convert milliseconds relative to t = 0 to the nearest sample index.
pub fn ms_to_index(ms: f64) -> i64 {
    (ms * SAMPLE_RATE_HZ / 1000.0).round() as i64 + CENTER_INDEX as i64
}
