//! Differentiable spectrogram front-ends with hand-derived gradients.
//!
//! The crate implements a trainable STFT kernel bank composed with a
//! trainable Mel filterbank (free-form or shape-constrained), small
//! classifiers (linear head, LSTM), softmax cross-entropy and CTC losses,
//! an Adam optimizer with per-stage freeze settings, end-to-end training
//! loops on deterministic synthetic speech tasks, and inspection tools for
//! the learned bases.

pub mod analysis;
pub mod bankfile;
pub mod error;
pub mod frontend;
pub mod gradcheck;
pub mod losses;
pub mod mat;
pub mod models;
pub mod optim;
pub mod signal_io;
pub mod trainer;

pub use error::{Error, Result};
pub use mat::Mat;

/// Everything in this crate runs at 16 kHz.
pub const SAMPLE_RATE_HZ: u32 = 16_000;

/// Production STFT geometry: 480-tap window, hop 160, 241 one-sided bins.
pub const N_FFT: usize = 480;
pub const HOP: usize = 160;
pub const N_BINS: usize = 241;

/// Mel banks span 0..8000 Hz.
pub const FMIN_HZ: f64 = 0.0;
pub const FMAX_HZ: f64 = 8000.0;
