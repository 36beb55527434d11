//! Audio ingestion and deterministic synthetic datasets.
//!
//! Real data enters through WAV files listed in a CSV manifest; synthetic
//! toy data is generated as a pure function of `(task, count, seed)` so
//! every test and experiment runs offline and reproduces bit-exactly.

pub mod manifest;
pub mod resample;
pub mod synth;
pub mod wav;

pub use manifest::{load_clips, read_manifest, write_manifest, DatasetManifest, EntrySource};
pub use resample::resample_to_16k;
pub use synth::{synth_asr_clip, synth_kws_clip, synth_toy_dataset, SynthRecipe, KWS_CLASSES};
pub use wav::{parse_wav, write_wav_pcm16};

use crate::error::{Error, Result};

/// Task selector used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Kws,
    Asr,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Kws => write!(f, "kws"),
            Task::Asr => write!(f, "asr"),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kws" => Ok(Task::Kws),
            "asr" => Ok(Task::Asr),
            other => Err(Error::Parse(format!("unknown task `{other}`"))),
        }
    }
}

/// Label payload carried by a clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClipLabel {
    /// Decoded audio that has not been matched to a manifest row yet.
    Unlabeled,
    /// Keyword-spotting class index.
    Class(usize),
    /// Phoneme index sequence for CTC training.
    Phonemes(Vec<usize>),
}

/// A mono waveform with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformClip {
    /// Amplitudes in `[-1, 1]`.
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub label: ClipLabel,
}

impl WaveformClip {
    /// Check the domain invariants; used liberally in tests.
    pub fn check_invariants(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        for (i, &s) in self.samples.iter().enumerate() {
            if !(-1.0..=1.0).contains(&s) {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} = {s} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Zero-pad at the end or truncate to exactly `len` samples (the
    /// fixed-length policy for keyword-spotting clips).
    pub fn fix_length(&mut self, len: usize) {
        self.samples.resize(len, 0.0);
    }
}
