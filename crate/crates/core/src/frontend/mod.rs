//! The differentiable audio front-end: trainable STFT kernels composed with
//! a trainable Mel projection, plus STFT-bin masking.

pub mod mel;
pub mod stft;
pub mod window;

pub use mel::{
    hz_to_mel, init_mel_constrained, init_mel_freeform, init_mel_random, materialize_constrained,
    mel_backward, mel_forward, mel_to_hz, MelFilterBank, MelGrads, MelParamGrads, MelStyle,
    TriangleShape,
};
pub use stft::{
    frame_count, init_stft_kernels, init_stft_kernels_default, stft_backward, stft_forward,
    StftCache, StftGrads, StftKernelBank, MAG_EPSILON,
};
pub use window::make_hann_window;

use crate::error::{Error, Result};
use crate::mat::Mat;
use std::fmt;
use std::str::FromStr;

/// Nonnegative time-frequency feature matrix, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: Mat,
    pub hop_seconds: f64,
}

impl Spectrogram {
    pub fn new(frames: Mat, hop_seconds: f64) -> Self {
        Spectrogram { frames, hop_seconds }
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.cols()
    }

    /// Row-major flattening, frame-major: `[frame 0 bins..., frame 1 bins...]`.
    pub fn flatten(&self) -> &[f64] {
        self.frames.as_slice()
    }
}

/// Inclusive STFT-bin intervals to be zeroed before the Mel projection.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MaskSpec {
    ranges: Vec<(usize, usize)>,
}

impl MaskSpec {
    pub const MAX_BIN: usize = 240;

    /// Build from inclusive `[lo, hi]` intervals; all bounds must lie in
    /// `[0, 240]`.
    pub fn new(ranges: Vec<(usize, usize)>) -> Result<Self> {
        for &(lo, hi) in &ranges {
            if lo > hi || hi > Self::MAX_BIN {
                return Err(Error::InvalidArgument(format!(
                    "mask interval {lo}-{hi} outside [0, {}]",
                    Self::MAX_BIN
                )));
            }
        }
        Ok(MaskSpec { ranges })
    }

    pub fn none() -> Self {
        MaskSpec::default()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    pub fn covers(&self, bin: usize) -> bool {
        self.ranges.iter().any(|&(lo, hi)| lo <= bin && bin <= hi)
    }

    /// Total number of masked columns (intervals may overlap).
    pub fn masked_bin_count(&self) -> usize {
        (0..=Self::MAX_BIN).filter(|&b| self.covers(b)).count()
    }
}

impl FromStr for MaskSpec {
    type Err = Error;

    /// Parse `"25-49,216-240"`; `"none"` or the empty string mean no mask.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") {
            return Ok(MaskSpec::none());
        }
        let mut ranges = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let (lo, hi) = match part.split_once('-') {
                Some((a, b)) => {
                    let lo = a.trim().parse::<usize>().map_err(|_| bad_mask(part))?;
                    let hi = b.trim().parse::<usize>().map_err(|_| bad_mask(part))?;
                    (lo, hi)
                }
                None => {
                    let v = part.parse::<usize>().map_err(|_| bad_mask(part))?;
                    (v, v)
                }
            };
            ranges.push((lo, hi));
        }
        MaskSpec::new(ranges)
    }
}

fn bad_mask(part: &str) -> Error {
    Error::Parse(format!("bad mask interval `{part}`; expected `lo-hi`"))
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ranges.is_empty() {
            return write!(f, "none");
        }
        let parts: Vec<String> = self
            .ranges
            .iter()
            .map(|&(lo, hi)| format!("{lo}-{hi}"))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Zero the masked columns of a magnitude spectrogram. Masked columns carry
/// zero gradient: apply the same mask to the upstream gradient before
/// [`stft_backward`].
pub fn apply_mask(mag: &Spectrogram, spec: &MaskSpec) -> Result<Spectrogram> {
    let mut out = mag.clone();
    mask_in_place(&mut out.frames, spec, mag.n_bins())?;
    Ok(out)
}

/// In-place variant of [`apply_mask`] for matrices (used on both the forward
/// magnitudes and the backward magnitude gradients).
pub fn mask_in_place(frames: &mut Mat, spec: &MaskSpec, n_bins: usize) -> Result<()> {
    for &(lo, hi) in spec.ranges() {
        if hi >= n_bins {
            return Err(Error::InvalidArgument(format!(
                "mask interval {lo}-{hi} exceeds {n_bins} bins"
            )));
        }
    }
    if spec.is_empty() {
        return Ok(());
    }
    for t in 0..frames.rows() {
        let row = frames.row_mut(t);
        for &(lo, hi) in spec.ranges() {
            for v in &mut row[lo..=hi] {
                *v = 0.0;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_mag() -> Spectrogram {
        Spectrogram::new(Mat::from_fn(3, 241, |t, k| (t * 241 + k) as f64 + 1.0), 0.01)
    }

    #[test]
    fn mask_216_240_zeroes_25_columns() {
        let spec: MaskSpec = "216-240".parse().unwrap();
        assert_eq!(spec.masked_bin_count(), 25);
        let out = apply_mask(&demo_mag(), &spec).unwrap();
        for t in 0..3 {
            for k in 0..241 {
                let v = out.frames.get(t, k);
                if (216..=240).contains(&k) {
                    assert_eq!(v, 0.0);
                } else {
                    assert_eq!(v, demo_mag().frames.get(t, k));
                }
            }
        }
    }

    #[test]
    fn empty_mask_is_identity() {
        let out = apply_mask(&demo_mag(), &MaskSpec::none()).unwrap();
        assert_eq!(out.frames, demo_mag().frames);
    }

    #[test]
    fn full_mask_zeroes_everything() {
        let spec: MaskSpec = "0-240".parse().unwrap();
        let out = apply_mask(&demo_mag(), &spec).unwrap();
        assert!(out.frames.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_parse_and_display() {
        let spec: MaskSpec = "25-49,216-240".parse().unwrap();
        assert_eq!(spec.ranges(), &[(25, 49), (216, 240)]);
        assert_eq!(spec.to_string(), "25-49,216-240");
        assert_eq!("none".parse::<MaskSpec>().unwrap(), MaskSpec::none());
        assert!("25-300".parse::<MaskSpec>().is_err());
        assert!("49-25".parse::<MaskSpec>().is_err());
        assert!("abc".parse::<MaskSpec>().is_err());
    }
}
