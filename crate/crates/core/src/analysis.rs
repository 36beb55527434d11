//! Introspection of learned bases: cumulative importance profiles and DFTs
//! of trained STFT kernels, exported as CSV for plotting.

use crate::error::{Error, Result};
use crate::frontend::{MelFilterBank, StftKernelBank};

/// Per-STFT-bin sum of all Mel filter weights, normalized by its maximum so
/// the profile lives in `[0, 1]`.
pub fn cumulative_importance(bank: &MelFilterBank) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; bank.n_bins];
    for j in 0..bank.n_mels {
        for (s, &w) in sums.iter_mut().zip(bank.weights.row(j).iter()) {
            *s += w;
        }
    }
    let max = sums.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::UndefinedNormalization(
            "mel bank sums to zero everywhere".into(),
        ));
    }
    for s in &mut sums {
        *s /= max;
    }
    Ok(sums)
}

/// One-sided DFT magnitude of the complex kernel `real + i*imag` for one
/// bin; naive `O(n^2)` evaluation over the kernel's `n_fft` taps.
pub fn kernel_dft(bank: &StftKernelBank, bin: usize) -> Result<Vec<f64>> {
    if bin >= bank.n_bins() {
        return Err(Error::InvalidArgument(format!(
            "bin {bin} out of range for {} bins",
            bank.n_bins()
        )));
    }
    let n = bank.n_fft;
    let re = bank.real.row(bin);
    let im = bank.imag.row(bin);
    let mut out = Vec::with_capacity(bank.n_bins());
    for f in 0..bank.n_bins() {
        let mut acc_re = 0.0;
        let mut acc_im = 0.0;
        for k in 0..n {
            let ang = -2.0 * std::f64::consts::PI * (f * k) as f64 / n as f64;
            let (s, c) = ang.sin_cos();
            // (re + i im) * (cos + i sin)
            acc_re += re[k] * c - im[k] * s;
            acc_im += re[k] * s + im[k] * c;
        }
        out.push((acc_re * acc_re + acc_im * acc_im).sqrt());
    }
    Ok(out)
}

/// Sum of [`kernel_dft`] over every bin, normalized by the maximum.
pub fn stft_cumulative_importance(bank: &StftKernelBank) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; bank.n_bins()];
    for bin in 0..bank.n_bins() {
        let spectrum = kernel_dft(bank, bin)?;
        for (s, v) in sums.iter_mut().zip(spectrum.iter()) {
            *s += v;
        }
    }
    let max = sums.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::UndefinedNormalization(
            "kernel bank has zero spectrum".into(),
        ));
    }
    for s in &mut sums {
        *s /= max;
    }
    Ok(sums)
}
