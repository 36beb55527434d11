//! Trainable Mel filterbanks.
//!
//! Two parameterizations of the projection from STFT magnitude bins to Mel
//! bins:
//!
//! * `FreeForm` — the weight matrix itself is the parameter set. Initialized
//!   as area-normalized triangles whose peak amplitude decays with filter
//!   index; during training the weights may take any shape and are clamped
//!   to `[0, 1]` after each optimizer step.
//! * `ShapeConstrained` — each filter is a unit-peak triangle described by a
//!   (center, width) pair on the Mel axis. Only those pairs train; the
//!   materialized rows stay triangular forever. Width positivity is kept by
//!   a softplus reparameterization.

use crate::error::{Error, Result};
use crate::mat::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Spectrogram;

/// HTK mel scale: `m(f) = 2595 * log10(1 + f/700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Inverse of [`hz_to_mel`].
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0_f64.powf(mel / 2595.0) - 1.0)
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn softplus_inv(w: f64) -> f64 {
    debug_assert!(w > 0.0);
    // ln(e^w - 1) = w + ln(1 - e^-w), stable for large w.
    w + (-(-w).exp()).ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelStyle {
    FreeForm,
    ShapeConstrained,
}

/// Triangle parameters of one shape-constrained filter. The effective width
/// is `softplus(raw_width)` so it stays positive under unconstrained updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleShape {
    pub center_mel: f64,
    pub raw_width: f64,
}

impl TriangleShape {
    pub fn width_mel(&self) -> f64 {
        softplus(self.raw_width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterBank {
    pub style: MelStyle,
    /// Materialized projection, `n_mels x n_bins`. For `FreeForm` these are
    /// the trainable parameters; for `ShapeConstrained` they are derived
    /// from `shape` and refreshed after every parameter update.
    pub weights: Mat,
    /// Present only for `ShapeConstrained`.
    pub shape: Option<Vec<TriangleShape>>,
    pub n_mels: usize,
    pub n_bins: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub trainable: bool,
}

impl MelFilterBank {
    /// Hz position of STFT bin `k`; bins span `[0, fmax]` linearly.
    pub fn bin_hz(&self, k: usize) -> f64 {
        bin_hz(k, self.n_bins, self.fmax_hz)
    }

    /// Recompute `weights` from `shape`. No-op for free-form banks.
    pub fn rematerialize(&mut self) {
        if let Some(shape) = &self.shape {
            self.weights = materialize_constrained(shape, self.n_bins, self.fmax_hz);
        }
    }
}

fn bin_hz(k: usize, n_bins: usize, fmax_hz: f64) -> f64 {
    k as f64 * fmax_hz / (n_bins - 1) as f64
}

/// Mel-equally-spaced boundary points, `n_mels + 2` of them.
fn mel_boundaries(n_mels: usize, fmin_hz: f64, fmax_hz: f64) -> Vec<f64> {
    let lo = hz_to_mel(fmin_hz);
    let hi = hz_to_mel(fmax_hz);
    (0..n_mels + 2)
        .map(|j| lo + (hi - lo) * j as f64 / (n_mels + 1) as f64)
        .collect()
}

/// Free-form bank initialized as amplitude-decaying triangles.
///
/// Filter j is a triangle in Hz over mel-grid boundaries (j, j+1, j+2),
/// sampled at the bin centers, with its sampled peak set to the area norm
/// `2 / (f_hi - f_lo)`; the whole bank is then rescaled so its largest entry
/// is exactly 1.
pub fn init_mel_freeform(
    n_mels: usize,
    fmin_hz: f64,
    fmax_hz: f64,
    n_bins: usize,
) -> Result<MelFilterBank> {
    if n_mels == 0 {
        return Err(Error::InvalidArgument("n_mels must be >= 1".into()));
    }
    let mels = mel_boundaries(n_mels, fmin_hz, fmax_hz);
    let hz: Vec<f64> = mels.iter().map(|&m| mel_to_hz(m)).collect();

    let mut weights = Mat::zeros(n_mels, n_bins);
    for j in 0..n_mels {
        let (lo, mid, hi) = (hz[j], hz[j + 1], hz[j + 2]);
        let row = weights.row_mut(j);
        for (k, w) in row.iter_mut().enumerate() {
            let f = bin_hz(k, n_bins, fmax_hz);
            let tri = if f <= lo || f >= hi {
                0.0
            } else if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            };
            *w = tri;
        }
        let peak = row.iter().copied().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::DegenerateFilter(format!(
                "mel filter {j} has no support on the {n_bins}-bin grid"
            )));
        }
        let amp = 2.0 / (hi - lo);
        for w in row.iter_mut() {
            *w = *w / peak * amp;
        }
    }
    let global = weights.max_value();
    weights.scale(1.0 / global);

    Ok(MelFilterBank {
        style: MelStyle::FreeForm,
        weights,
        shape: None,
        n_mels,
        n_bins,
        fmin_hz,
        fmax_hz,
        trainable: false,
    })
}

/// Free-form bank with Uniform[0,1] weights; used to probe whether training
/// converges to the same attention pattern from an uninformative start.
pub fn init_mel_random(
    n_mels: usize,
    fmin_hz: f64,
    fmax_hz: f64,
    n_bins: usize,
    seed: u64,
) -> Result<MelFilterBank> {
    if n_mels == 0 {
        return Err(Error::InvalidArgument("n_mels must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = Mat::from_fn(n_mels, n_bins, |_, _| rng.random_range(0.0..1.0));
    Ok(MelFilterBank {
        style: MelStyle::FreeForm,
        weights,
        shape: None,
        n_mels,
        n_bins,
        fmin_hz,
        fmax_hz,
        trainable: false,
    })
}

/// Shape-constrained bank: unit-peak triangles centered on the interior mel
/// grid points, one grid spacing wide on each side.
pub fn init_mel_constrained(
    n_mels: usize,
    fmin_hz: f64,
    fmax_hz: f64,
    n_bins: usize,
) -> Result<MelFilterBank> {
    if n_mels == 0 {
        return Err(Error::InvalidArgument("n_mels must be >= 1".into()));
    }
    let mels = mel_boundaries(n_mels, fmin_hz, fmax_hz);
    let spacing = mels[1] - mels[0];
    let shape: Vec<TriangleShape> = (0..n_mels)
        .map(|j| TriangleShape {
            center_mel: mels[j + 1],
            raw_width: softplus_inv(spacing),
        })
        .collect();
    let weights = materialize_constrained(&shape, n_bins, fmax_hz);
    for j in 0..n_mels {
        if weights.row(j).iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateFilter(format!(
                "constrained mel filter {j} has no support on the {n_bins}-bin grid"
            )));
        }
    }
    Ok(MelFilterBank {
        style: MelStyle::ShapeConstrained,
        weights,
        shape: Some(shape),
        n_mels,
        n_bins,
        fmin_hz,
        fmax_hz,
        trainable: false,
    })
}

/// Evaluate the unit-peak triangles on the bin grid:
/// `row j, bin k = max(0, 1 - |mel(bin k) - center_j| / width_j)`.
pub fn materialize_constrained(shape: &[TriangleShape], n_bins: usize, fmax_hz: f64) -> Mat {
    let bin_mels: Vec<f64> = (0..n_bins)
        .map(|k| hz_to_mel(bin_hz(k, n_bins, fmax_hz)))
        .collect();
    Mat::from_fn(shape.len(), n_bins, |j, k| {
        let w = shape[j].width_mel();
        let t = 1.0 - (bin_mels[k] - shape[j].center_mel).abs() / w;
        t.max(0.0)
    })
}

/// Gradients of [`mel_backward`].
#[derive(Debug, Clone)]
pub struct MelGrads {
    pub params: MelParamGrads,
    /// Gradient w.r.t. the input magnitude spectrogram; `None` unless
    /// requested.
    pub d_mag: Option<Mat>,
}

#[derive(Debug, Clone)]
pub enum MelParamGrads {
    FreeForm(Mat),
    Shape {
        d_center_mel: Vec<f64>,
        d_raw_width: Vec<f64>,
    },
}

/// Project a magnitude spectrogram onto the Mel bins: `X_f = mag * W^T`.
pub fn mel_forward(mag: &Spectrogram, bank: &MelFilterBank) -> Result<Spectrogram> {
    if mag.frames.cols() != bank.n_bins {
        return Err(Error::ContractViolation(format!(
            "mel_forward: spectrogram has {} bins, bank expects {}",
            mag.frames.cols(),
            bank.n_bins
        )));
    }
    Ok(Spectrogram::new(
        mag.frames.matmul_nt(&bank.weights),
        mag.hop_seconds,
    ))
}

/// Backward through the bilinear Mel projection.
///
/// `upstream` is the loss gradient w.r.t. the Mel output; `mag` must be the
/// exact magnitude spectrogram passed to the matching forward call. For
/// shape-constrained banks the weight gradient is chained through the
/// triangle parameterization, with subgradient 0 at the apex and feet.
pub fn mel_backward(
    upstream: &Mat,
    mag: &Spectrogram,
    bank: &MelFilterBank,
    want_input_grad: bool,
) -> Result<MelGrads> {
    if upstream.rows() != mag.frames.rows() || upstream.cols() != bank.n_mels {
        return Err(Error::ContractViolation(format!(
            "mel_backward: upstream {:?} does not match {} frames x {} mels",
            upstream.shape(),
            mag.frames.rows(),
            bank.n_mels
        )));
    }
    if mag.frames.cols() != bank.n_bins {
        return Err(Error::ContractViolation(
            "mel_backward: magnitude bins do not match bank".into(),
        ));
    }

    let d_weights = upstream.matmul_tn(&mag.frames);

    let params = match bank.style {
        MelStyle::FreeForm => MelParamGrads::FreeForm(d_weights),
        MelStyle::ShapeConstrained => {
            let shape = bank
                .shape
                .as_ref()
                .expect("constrained bank carries shape params");
            let bin_mels: Vec<f64> = (0..bank.n_bins).map(|k| hz_to_mel(bank.bin_hz(k))).collect();
            let mut d_center = vec![0.0; bank.n_mels];
            let mut d_raw = vec![0.0; bank.n_mels];
            for (j, tri) in shape.iter().enumerate() {
                let w = tri.width_mel();
                let dw_draw = sigmoid(tri.raw_width);
                let mut dc = 0.0;
                let mut dwidth = 0.0;
                for (k, &m) in bin_mels.iter().enumerate() {
                    let u = m - tri.center_mel;
                    let au = u.abs();
                    // Strictly inside and away from the apex: the kinks get
                    // subgradient 0.
                    if au > 0.0 && au < w {
                        let g = d_weights.get(j, k);
                        dc += g * u.signum() / w;
                        dwidth += g * au / (w * w);
                    }
                }
                d_center[j] = dc;
                d_raw[j] = dwidth * dw_draw;
            }
            MelParamGrads::Shape {
                d_center_mel: d_center,
                d_raw_width: d_raw,
            }
        }
    };

    let d_mag = if want_input_grad {
        Some(upstream.matmul(&bank.weights))
    } else {
        None
    };

    Ok(MelGrads { params, d_mag })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_anchors() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        // Closed form evaluated independently in 64-bit.
        let want = 2595.0 * (1.0_f64 + 8000.0 / 700.0).log10();
        assert!((hz_to_mel(8000.0) - want).abs() < 1e-12);
        assert!((want - 2840.0).abs() < 0.5, "m(8000) = {want}");
        // Round trip.
        for f in [0.0, 120.5, 833.33, 4000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn softplus_inverse_round_trip() {
        for w in [1e-3, 0.5, 1.0, 35.0, 69.0, 500.0] {
            let raw = softplus_inv(w);
            assert!((softplus(raw) - w).abs() / w < 1e-12, "w = {w}");
        }
    }

    #[test]
    fn freeform_init_peaks_decay_and_max_is_one() {
        for n_mels in [10, 20, 30, 40] {
            let bank = init_mel_freeform(n_mels, 0.0, 8000.0, 241).unwrap();
            assert_eq!(bank.weights.shape(), (n_mels, 241));
            let peaks: Vec<f64> = (0..n_mels)
                .map(|j| bank.weights.row(j).iter().copied().fold(0.0, f64::max))
                .collect();
            for pair in peaks.windows(2) {
                assert!(
                    pair[0] >= pair[1] - 1e-12,
                    "n_mels={n_mels}: peaks {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
            assert_eq!(bank.weights.max_value(), 1.0);
            assert!(bank.weights.min_value() >= 0.0);
        }
    }

    #[test]
    fn freeform_degenerate_at_excessive_resolution() {
        assert!(matches!(
            init_mel_freeform(400, 0.0, 8000.0, 241),
            Err(Error::DegenerateFilter(_))
        ));
    }

    #[test]
    fn constrained_init_unit_peak_zero_at_feet() {
        let bank = init_mel_constrained(40, 0.0, 8000.0, 241).unwrap();
        let shape = bank.shape.as_ref().unwrap();
        let mels = mel_boundaries(40, 0.0, 8000.0);
        for (j, tri) in shape.iter().enumerate() {
            // The parameterized apex is exactly 1 and the feet sit on the
            // neighboring grid points.
            assert!((tri.center_mel - mels[j + 1]).abs() < 1e-9);
            assert!((tri.width_mel() - (mels[1] - mels[0])).abs() < 1e-9);
            let apex = 1.0 - (tri.center_mel - tri.center_mel).abs() / tri.width_mel();
            assert_eq!(apex, 1.0);
            let at_lo = 1.0 - (mels[j] - tri.center_mel).abs() / tri.width_mel();
            let at_hi = 1.0 - (mels[j + 2] - tri.center_mel).abs() / tri.width_mel();
            assert!(at_lo.abs() < 1e-9 && at_hi.abs() < 1e-9);
        }
        assert!(bank.weights.min_value() >= 0.0);
        assert!(bank.weights.max_value() <= 1.0);
    }

    #[test]
    fn constrained_matches_direct_triangle_bank() {
        let bank = init_mel_constrained(40, 0.0, 8000.0, 241).unwrap();
        let mels = mel_boundaries(40, 0.0, 8000.0);
        // Direct equal-amplitude triangular bank on the same grid.
        for j in 0..40 {
            for k in 0..241 {
                let m = hz_to_mel(bank.bin_hz(k));
                let rising = (m - mels[j]) / (mels[j + 1] - mels[j]);
                let falling = (mels[j + 2] - m) / (mels[j + 2] - mels[j + 1]);
                let want = rising.min(falling).max(0.0);
                assert!(
                    (bank.weights.get(j, k) - want).abs() < 1e-12,
                    "filter {j} bin {k}"
                );
            }
        }
    }

    #[test]
    fn mel_forward_identity_bank_and_zero_input() {
        // Identity-like bank: n_mels == n_bins, identity weights.
        let n = 9;
        let mut bank = init_mel_freeform(4, 0.0, 8000.0, n).unwrap();
        bank.n_mels = n;
        bank.weights = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 });
        let mag = Spectrogram::new(
            Mat::from_fn(3, n, |t, k| (t * n + k) as f64 * 0.1),
            0.01,
        );
        let out = mel_forward(&mag, &bank).unwrap();
        for (a, b) in out.frames.as_slice().iter().zip(mag.frames.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }

        let zeros = Spectrogram::new(Mat::zeros(3, n), 0.01);
        let out = mel_forward(&zeros, &bank).unwrap();
        assert!(out.frames.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mel_forward_matches_triple_loop_oracle() {
        let bank = init_mel_freeform(5, 0.0, 8000.0, 241).unwrap();
        let mag = Spectrogram::new(
            Mat::from_fn(3, 241, |t, k| ((t * 241 + k) as f64 * 0.37).sin().abs()),
            0.01,
        );
        let out = mel_forward(&mag, &bank).unwrap();
        for t in 0..3 {
            for j in 0..5 {
                let mut acc = 0.0;
                for k in 0..241 {
                    acc += mag.frames.get(t, k) * bank.weights.get(j, k);
                }
                assert!((out.frames.get(t, j) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mel_backward_zero_upstream() {
        let bank = init_mel_constrained(5, 0.0, 8000.0, 81).unwrap();
        let mag = Spectrogram::new(Mat::from_fn(4, 81, |t, k| (t + k) as f64 * 0.01), 0.01);
        let up = Mat::zeros(4, 5);
        let grads = mel_backward(&up, &mag, &bank, true).unwrap();
        match grads.params {
            MelParamGrads::Shape {
                d_center_mel,
                d_raw_width,
            } => {
                assert!(d_center_mel.iter().all(|&v| v == 0.0));
                assert!(d_raw_width.iter().all(|&v| v == 0.0));
            }
            _ => panic!("expected shape grads"),
        }
        assert!(grads.d_mag.unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mel_backward_shape_mismatch_rejected() {
        let bank = init_mel_freeform(5, 0.0, 8000.0, 81).unwrap();
        let mag = Spectrogram::new(Mat::zeros(4, 81), 0.01);
        let bad = Mat::zeros(4, 6);
        assert!(mel_backward(&bad, &mag, &bank, false).is_err());
    }
}
