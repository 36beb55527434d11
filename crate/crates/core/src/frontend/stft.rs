//! Trainable STFT kernel bank: forward transform and hand-derived backward.
//!
//! Each one-sided frequency bin k owns a pair of time-domain kernels that
//! start out as the windowed DFT basis (`window .* cos`, `window .* sin`).
//! When the bank is trainable the kernels are free parameters; the window is
//! baked into the initialization and never reapplied.

use super::window::make_hann_window;
use super::Spectrogram;
use crate::error::{Error, Result};
use crate::mat::Mat;

/// Floor added under `re^2 + im^2` so the magnitude gradient stays finite
/// at zero energy.
pub const MAG_EPSILON: f64 = 1e-12;

/// Pair of real/imaginary time-domain kernel matrices realizing the STFT.
#[derive(Debug, Clone, PartialEq)]
pub struct StftKernelBank {
    /// Row k: real kernel of bin k, `n_fft` taps.
    pub real: Mat,
    /// Row k: imaginary kernel of bin k.
    pub imag: Mat,
    pub n_fft: usize,
    pub hop: usize,
    /// The analysis window used at initialization.
    pub window: Vec<f64>,
    pub trainable: bool,
}

impl StftKernelBank {
    /// Number of one-sided frequency bins (`n_fft/2 + 1`).
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Center frequency of bin `k` in Hz at the given sample rate.
    pub fn bin_hz(&self, k: usize, sample_rate_hz: u32) -> f64 {
        k as f64 * sample_rate_hz as f64 / self.n_fft as f64
    }
}

/// Build the windowed sinusoid kernel bank.
///
/// Row k of the real/imag kernels is `window[n] * cos(2*pi*k*n/n_fft)` and
/// `window[n] * sin(2*pi*k*n/n_fft)`; there are `n_fft/2 + 1` rows.
pub fn init_stft_kernels(n_fft: usize, hop: usize) -> StftKernelBank {
    assert!(n_fft >= 2 && n_fft % 2 == 0, "n_fft must be even and >= 2");
    assert!(hop >= 1, "hop must be >= 1");
    let window = make_hann_window(n_fft).expect("n_fft >= 2");
    let n_bins = n_fft / 2 + 1;
    let step = 2.0 * std::f64::consts::PI / n_fft as f64;
    let real = Mat::from_fn(n_bins, n_fft, |k, n| window[n] * (step * (k * n) as f64).cos());
    let imag = Mat::from_fn(n_bins, n_fft, |k, n| window[n] * (step * (k * n) as f64).sin());
    StftKernelBank {
        real,
        imag,
        n_fft,
        hop,
        window,
        trainable: false,
    }
}

/// The paper-geometry bank: 480-tap Hann, hop 160, 241 bins.
pub fn init_stft_kernels_default() -> StftKernelBank {
    init_stft_kernels(480, 160)
}

/// Mirror an out-of-range index back into `[0, len)` without repeating the
/// edge sample (reflect padding).
#[inline]
fn reflect_index(i: isize, len: usize) -> usize {
    debug_assert!(len >= 1);
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Everything the backward pass needs from a forward call.
#[derive(Debug, Clone)]
pub struct StftCache {
    /// Reflect-padded signal slices, one row per frame (`t_frames x n_fft`).
    pub frames: Mat,
    /// Per-frame inner products against the real kernels (`t_frames x n_bins`).
    pub re: Mat,
    /// Per-frame inner products against the imaginary kernels.
    pub im: Mat,
    /// Magnitudes, as returned in the spectrogram.
    pub mag: Mat,
    /// Original (unpadded) signal length.
    pub n_samples: usize,
}

/// Gradients produced by [`stft_backward`].
#[derive(Debug, Clone)]
pub struct StftGrads {
    pub d_real: Mat,
    pub d_imag: Mat,
    /// Gradient w.r.t. the input samples; `None` unless requested.
    pub d_samples: Option<Vec<f64>>,
}

/// Frame count for a signal of `n_samples` under center padding.
pub fn frame_count(n_samples: usize, hop: usize) -> usize {
    n_samples / hop + 1
}

/// Forward STFT magnitude.
///
/// The signal is reflect-padded by `n_fft/2` on both ends; frame t covers
/// padded samples `[t*hop, t*hop + n_fft)`. Output entry (t, k) is
/// `sqrt(re^2 + im^2 + MAG_EPSILON)`.
pub fn stft_forward(samples: &[f64], bank: &StftKernelBank) -> Result<(Spectrogram, StftCache)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("stft_forward: empty signal".into()));
    }
    let n_fft = bank.n_fft;
    let hop = bank.hop;
    let pad = n_fft / 2;
    let t_frames = frame_count(samples.len(), hop);

    let mut frames = Mat::zeros(t_frames, n_fft);
    for t in 0..t_frames {
        let start = (t * hop) as isize - pad as isize;
        let row = frames.row_mut(t);
        for (n, slot) in row.iter_mut().enumerate() {
            *slot = samples[reflect_index(start + n as isize, samples.len())];
        }
    }

    let re = frames.matmul_nt(&bank.real);
    let im = frames.matmul_nt(&bank.imag);
    let mut mag = Mat::zeros(t_frames, bank.n_bins());
    for (m, (&r, &i)) in mag
        .as_mut_slice()
        .iter_mut()
        .zip(re.as_slice().iter().zip(im.as_slice().iter()))
    {
        *m = (r * r + i * i + MAG_EPSILON).sqrt();
    }

    let spec = Spectrogram::new(mag.clone(), hop as f64 / crate::SAMPLE_RATE_HZ as f64);
    let cache = StftCache {
        frames,
        re,
        im,
        mag,
        n_samples: samples.len(),
    };
    Ok((spec, cache))
}

/// Backward pass through magnitude, inner products, framing, and padding.
///
/// `upstream` is the loss gradient w.r.t. the magnitude spectrogram. Kernel
/// gradients are always produced; set `want_input_grad` to also fold the
/// frame gradients back through the reflect padding onto the source samples.
pub fn stft_backward(
    upstream: &Mat,
    cache: &StftCache,
    bank: &StftKernelBank,
    want_input_grad: bool,
) -> Result<StftGrads> {
    if upstream.shape() != cache.mag.shape() {
        return Err(Error::ContractViolation(format!(
            "stft_backward: upstream {:?} does not match cached magnitude {:?}",
            upstream.shape(),
            cache.mag.shape()
        )));
    }
    if cache.frames.cols() != bank.n_fft || cache.re.cols() != bank.n_bins() {
        return Err(Error::ContractViolation(
            "stft_backward: cache does not match kernel bank geometry".into(),
        ));
    }

    let (t_frames, n_bins) = upstream.shape();
    // d mag / d re = re / mag (mag > 0 thanks to the epsilon floor).
    let mut d_re = Mat::zeros(t_frames, n_bins);
    let mut d_im = Mat::zeros(t_frames, n_bins);
    for idx in 0..upstream.len() {
        let up = upstream.as_slice()[idx];
        let m = cache.mag.as_slice()[idx];
        d_re.as_mut_slice()[idx] = up * cache.re.as_slice()[idx] / m;
        d_im.as_mut_slice()[idx] = up * cache.im.as_slice()[idx] / m;
    }

    let d_real = d_re.matmul_tn(&cache.frames);
    let d_imag = d_im.matmul_tn(&cache.frames);

    let d_samples = if want_input_grad {
        // Gradient w.r.t. each padded frame sample, then fold the padding.
        let mut d_frames = d_re.matmul(&bank.real);
        d_frames.add_assign(&d_im.matmul(&bank.imag));
        let pad = bank.n_fft / 2;
        let mut d_x = vec![0.0; cache.n_samples];
        for t in 0..t_frames {
            let start = (t * bank.hop) as isize - pad as isize;
            for (n, &g) in d_frames.row(t).iter().enumerate() {
                d_x[reflect_index(start + n as isize, cache.n_samples)] += g;
            }
        }
        Some(d_x)
    } else {
        None
    };

    Ok(StftGrads {
        d_real,
        d_imag,
        d_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_geometry() {
        let bank = init_stft_kernels_default();
        assert_eq!(bank.real.shape(), (241, 480));
        assert_eq!(bank.imag.shape(), (241, 480));
        assert_eq!(bank.n_bins(), 241);
        assert!((bank.bin_hz(25, 16000) - 833.3333333333334).abs() < 1e-9);
    }

    #[test]
    fn bin0_and_nyquist_kernels() {
        let bank = init_stft_kernels_default();
        // Bin 0 real kernel is the window itself; its imaginary kernel is zero.
        for (a, w) in bank.real.row(0).iter().zip(bank.window.iter()) {
            assert!((a - w).abs() < 1e-15);
        }
        assert!(bank.imag.row(0).iter().all(|&v| v == 0.0));
        // sin(pi*n) vanishes at Nyquist.
        assert!(bank.imag.row(240).iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn zero_signal_gives_epsilon_floor() {
        let bank = init_stft_kernels_default();
        let samples = vec![0.0; 16000];
        let (spec, _) = stft_forward(&samples, &bank).unwrap();
        assert_eq!(spec.frames.shape(), (101, 241));
        let floor = MAG_EPSILON.sqrt();
        for &v in spec.frames.as_slice() {
            assert!((v - floor).abs() < 1e-18);
        }
    }

    #[test]
    fn frame_count_matches_contract() {
        assert_eq!(frame_count(16000, 160), 101);
        assert_eq!(frame_count(480, 160), 4);
        assert_eq!(frame_count(800, 160), 6);
        assert_eq!(frame_count(1, 160), 1);
    }

    #[test]
    fn reflect_index_small_cases() {
        // len 4: ... 2 1 | 0 1 2 3 | 2 1 0 1 ...
        assert_eq!(reflect_index(-1, 4), 1);
        assert_eq!(reflect_index(-2, 4), 2);
        assert_eq!(reflect_index(4, 4), 2);
        assert_eq!(reflect_index(5, 4), 1);
        assert_eq!(reflect_index(6, 4), 0);
        assert_eq!(reflect_index(0, 1), 0);
        assert_eq!(reflect_index(-7, 1), 0);
    }

    #[test]
    fn pure_tone_at_bin25_peaks_there() {
        let bank = init_stft_kernels_default();
        let freq = 25.0 * 16000.0 / 480.0;
        let samples: Vec<f64> = (0..16000)
            .map(|n| (2.0 * std::f64::consts::PI * freq * n as f64 / 16000.0).cos())
            .collect();
        let (spec, _) = stft_forward(&samples, &bank).unwrap();
        // Interior frames only; edge frames see reflected signal.
        for t in 2..99 {
            let row = spec.frames.row(t);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, 25, "frame {t}");
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let bank = init_stft_kernels(16, 8);
        let samples: Vec<f64> = (0..40).map(|n| (n as f64 * 0.3).sin()).collect();
        let (spec, cache) = stft_forward(&samples, &bank).unwrap();
        let upstream = Mat::zeros(spec.frames.rows(), spec.frames.cols());
        let grads = stft_backward(&upstream, &cache, &bank, true).unwrap();
        assert!(grads.d_real.as_slice().iter().all(|&v| v == 0.0));
        assert!(grads.d_imag.as_slice().iter().all(|&v| v == 0.0));
        assert!(grads.d_samples.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_bin_upstream_touches_only_that_row() {
        let bank = init_stft_kernels(16, 8);
        let samples: Vec<f64> = (0..40).map(|n| (n as f64 * 0.7).cos()).collect();
        let (spec, cache) = stft_forward(&samples, &bank).unwrap();
        let mut upstream = Mat::zeros(spec.frames.rows(), spec.frames.cols());
        upstream.set(2, 3, 1.0);
        let grads = stft_backward(&upstream, &cache, &bank, false).unwrap();
        for k in 0..bank.n_bins() {
            let row_nonzero = grads.d_real.row(k).iter().any(|&v| v != 0.0)
                || grads.d_imag.row(k).iter().any(|&v| v != 0.0);
            assert_eq!(row_nonzero, k == 3, "bin {k}");
        }
    }

    #[test]
    fn upstream_shape_mismatch_is_contract_violation() {
        let bank = init_stft_kernels(16, 8);
        let samples = vec![0.5; 32];
        let (_, cache) = stft_forward(&samples, &bank).unwrap();
        let bad = Mat::zeros(1, 9);
        assert!(stft_backward(&bad, &cache, &bank, false).is_err());
    }
}
