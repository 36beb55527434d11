//! Rational-rate resampling to 16 kHz with a Kaiser-windowed sinc
//! polyphase filter (beta 8.6, 32 taps per phase).

use super::WaveformClip;
use crate::error::Result;
use crate::SAMPLE_RATE_HZ;

const KAISER_BETA: f64 = 8.6;
const TAPS_PER_PHASE: usize = 32;

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// sin(pi x)/(pi x).
fn sincf(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Resample a clip to 16 kHz.
///
/// Identity when the clip is already at 16 kHz. The output length is
/// `floor(len * 16000 / rate)` and the samples stay inside `[-1, 1]`.
pub fn resample_to_16k(clip: &WaveformClip) -> Result<WaveformClip> {
    assert!(clip.sample_rate_hz > 0, "sample rate must be positive");
    if clip.sample_rate_hz == SAMPLE_RATE_HZ {
        return Ok(clip.clone());
    }

    let g = gcd(SAMPLE_RATE_HZ, clip.sample_rate_hz);
    let up = (SAMPLE_RATE_HZ / g) as usize; // L
    let down = (clip.sample_rate_hz / g) as usize; // M

    // Low-pass at 90% of the tighter Nyquist, in the upsampled domain.
    let cutoff = 0.9 / up.max(down) as f64;
    let n_taps = TAPS_PER_PHASE * up;
    let center = (n_taps - 1) as f64 / 2.0;
    let i0_beta = bessel_i0(KAISER_BETA);
    let taps: Vec<f64> = (0..n_taps)
        .map(|k| {
            let t = k as f64 - center;
            let r = t / center;
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            up as f64 * cutoff * sincf(cutoff * t) * window
        })
        .collect();

    let in_len = clip.samples.len();
    let out_len = in_len * SAMPLE_RATE_HZ as usize / clip.sample_rate_hz as usize;
    let half = (n_taps - 1) as isize;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        // Upsampled-domain position of output sample n, filter centered.
        let j0 = (n * down) as isize + (n_taps as isize - 1) / 2;
        // Valid input indices i satisfy 0 <= j0 - i*up <= n_taps - 1.
        let i_lo = ((j0 - half) as f64 / up as f64).ceil() as isize;
        let i_hi = (j0 as f64 / up as f64).floor() as isize;
        let mut acc = 0.0;
        for i in i_lo.max(0)..=i_hi.min(in_len as isize - 1) {
            let tap = (j0 - i * up as isize) as usize;
            acc += taps[tap] * clip.samples[i as usize];
        }
        out.push(acc.clamp(-1.0, 1.0));
    }

    Ok(WaveformClip {
        samples: out,
        sample_rate_hz: SAMPLE_RATE_HZ,
        label: clip.label.clone(),
    })
}
