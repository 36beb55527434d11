//! Central finite-difference verification of every hand-derived backward
//! pass. Each suite perturbs parameters one coordinate at a time (64-bit,
//! step 1e-4) and compares against the analytic gradient; only forward
//! paths are used to compute the numeric side.
//!
//! The CLI `gradcheck` subcommand and the acceptance tests both run
//! [`run_all`].

use crate::frontend::{
    init_mel_constrained, init_mel_freeform, init_stft_kernels, init_stft_kernels_default,
    materialize_constrained, mel_backward, mel_forward, stft_backward, stft_forward,
    MelFilterBank, MelParamGrads, Spectrogram, TriangleShape,
};
use crate::losses::{ctc_loss, log_softmax_rows, softmax_xent, CtcTarget};
use crate::mat::Mat;
use crate::models::{LinearHead, LstmLayer};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const DEFAULT_TOL: f64 = 1e-4;

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub checks: usize,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

struct ErrTracker {
    max: f64,
    n: usize,
}

impl ErrTracker {
    fn new() -> Self {
        ErrTracker { max: 0.0, n: 0 }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        if rel > self.max {
            self.max = rel;
        }
        self.n += 1;
    }
}

fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

fn weighted_sum(coeff: &Mat, value: &Mat) -> f64 {
    coeff
        .as_slice()
        .iter()
        .zip(value.as_slice().iter())
        .map(|(c, v)| c * v)
        .sum()
}

/// STFT kernel and input gradients on a tiny bank (every coordinate) plus
/// the production-size bank (sampled coordinates).
pub fn check_stft(seed: u64) -> SuiteReport {
    let mut tracker = ErrTracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7374);

    // Tiny geometry: all coordinates of both kernel matrices and the input.
    {
        let mut bank = init_stft_kernels(16, 8);
        let samples: Vec<f64> = (0..40).map(|_| rng.random_range(-0.9..0.9)).collect();
        let (mag, cache) = stft_forward(&samples, &bank).unwrap();
        let coeff = rand_mat(&mut rng, mag.frames.rows(), mag.frames.cols(), 1.0);
        let grads = stft_backward(&coeff, &cache, &bank, true).unwrap();

        let loss = |bank: &crate::frontend::StftKernelBank, samples: &[f64]| -> f64 {
            let (mag, _) = stft_forward(samples, bank).unwrap();
            weighted_sum(&coeff, &mag.frames)
        };

        for r in 0..bank.real.rows() {
            for c in 0..bank.real.cols() {
                for which in 0..2 {
                    let (m, g) = if which == 0 {
                        (&mut bank.real, grads.d_real.get(r, c))
                    } else {
                        (&mut bank.imag, grads.d_imag.get(r, c))
                    };
                    let old = m.get(r, c);
                    m.set(r, c, old + FD_STEP);
                    let lp = loss(&bank, &samples);
                    let m = if which == 0 { &mut bank.real } else { &mut bank.imag };
                    m.set(r, c, old - FD_STEP);
                    let lm = loss(&bank, &samples);
                    let m = if which == 0 { &mut bank.real } else { &mut bank.imag };
                    m.set(r, c, old);
                    tracker.record(g, (lp - lm) / (2.0 * FD_STEP));
                }
            }
        }

        let d_samples = grads.d_samples.as_ref().unwrap();
        let mut samples = samples;
        for i in 0..samples.len() {
            let old = samples[i];
            samples[i] = old + FD_STEP;
            let lp = loss(&bank, &samples);
            samples[i] = old - FD_STEP;
            let lm = loss(&bank, &samples);
            samples[i] = old;
            tracker.record(d_samples[i], (lp - lm) / (2.0 * FD_STEP));
        }
    }

    // Production geometry, random coordinate sample (T_t = 800).
    {
        let mut bank = init_stft_kernels_default();
        let samples: Vec<f64> = (0..800).map(|_| rng.random_range(-0.9..0.9)).collect();
        let (mag, cache) = stft_forward(&samples, &bank).unwrap();
        let coeff = rand_mat(&mut rng, mag.frames.rows(), mag.frames.cols(), 1.0);
        let grads = stft_backward(&coeff, &cache, &bank, true).unwrap();

        let loss = |bank: &crate::frontend::StftKernelBank, samples: &[f64]| -> f64 {
            let (mag, _) = stft_forward(samples, bank).unwrap();
            weighted_sum(&coeff, &mag.frames)
        };

        for _ in 0..250 {
            let r = rng.random_range(0..bank.real.rows());
            let c = rng.random_range(0..bank.real.cols());
            let which = rng.random_range(0..2usize);
            let (m, g) = if which == 0 {
                (&mut bank.real, grads.d_real.get(r, c))
            } else {
                (&mut bank.imag, grads.d_imag.get(r, c))
            };
            let old = m.get(r, c);
            m.set(r, c, old + FD_STEP);
            let lp = loss(&bank, &samples);
            let m = if which == 0 { &mut bank.real } else { &mut bank.imag };
            m.set(r, c, old - FD_STEP);
            let lm = loss(&bank, &samples);
            let m = if which == 0 { &mut bank.real } else { &mut bank.imag };
            m.set(r, c, old);
            tracker.record(g, (lp - lm) / (2.0 * FD_STEP));
        }

        let d_samples = grads.d_samples.as_ref().unwrap();
        let mut samples = samples;
        for _ in 0..100 {
            let i = rng.random_range(0..samples.len());
            let old = samples[i];
            samples[i] = old + FD_STEP;
            let lp = loss(&bank, &samples);
            samples[i] = old - FD_STEP;
            let lm = loss(&bank, &samples);
            samples[i] = old;
            tracker.record(d_samples[i], (lp - lm) / (2.0 * FD_STEP));
        }
    }

    SuiteReport {
        name: "stft",
        max_rel_err: tracker.max,
        checks: tracker.n,
        tolerance: DEFAULT_TOL,
    }
}

/// Free-form Mel weight and input gradients, every coordinate.
pub fn check_mel_freeform(seed: u64) -> SuiteReport {
    let mut tracker = ErrTracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d66);
    let mut bank = init_mel_freeform(5, 0.0, 8000.0, 241).unwrap();
    let t_frames = 4;
    let mag = Spectrogram::new(
        Mat::from_fn(t_frames, 241, |_, _| rng.random_range(0.0..2.0)),
        0.01,
    );
    let coeff = rand_mat(&mut rng, t_frames, 5, 1.0);

    let upstream = coeff.clone();
    let grads = mel_backward(&upstream, &mag, &bank, true).unwrap();
    let d_weights = match &grads.params {
        MelParamGrads::FreeForm(m) => m.clone(),
        _ => unreachable!(),
    };

    let loss = |bank: &MelFilterBank, mag: &Spectrogram| -> f64 {
        weighted_sum(&coeff, &mel_forward(mag, bank).unwrap().frames)
    };

    for r in 0..bank.weights.rows() {
        for c in 0..bank.weights.cols() {
            let old = bank.weights.get(r, c);
            bank.weights.set(r, c, old + FD_STEP);
            let lp = loss(&bank, &mag);
            bank.weights.set(r, c, old - FD_STEP);
            let lm = loss(&bank, &mag);
            bank.weights.set(r, c, old);
            tracker.record(d_weights.get(r, c), (lp - lm) / (2.0 * FD_STEP));
        }
    }

    let d_mag = grads.d_mag.as_ref().unwrap();
    let mut mag = mag;
    for r in 0..t_frames {
        for c in 0..241 {
            let old = mag.frames.get(r, c);
            mag.frames.set(r, c, old + FD_STEP);
            let lp = loss(&bank, &mag);
            mag.frames.set(r, c, old - FD_STEP);
            let lm = loss(&bank, &mag);
            mag.frames.set(r, c, old);
            tracker.record(d_mag.get(r, c), (lp - lm) / (2.0 * FD_STEP));
        }
    }

    SuiteReport {
        name: "mel_freeform",
        max_rel_err: tracker.max,
        checks: tracker.n,
        tolerance: DEFAULT_TOL,
    }
}

/// Shape-constrained Mel gradients w.r.t. centers and raw widths, with the
/// case generator keeping every bin safely away from the triangle kinks.
pub fn check_mel_constrained(seed: u64) -> SuiteReport {
    let mut tracker = ErrTracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d63);
    let mut bank = init_mel_constrained(5, 0.0, 8000.0, 241).unwrap();

    // Randomize the shapes a little, then nudge centers until no bin sits
    // within 10 steps of a kink (kinks carry subgradient 0 by contract, so
    // finite differences disagree there by construction).
    let bin_mels: Vec<f64> = (0..241).map(|k| crate::frontend::hz_to_mel(bank.bin_hz(k))).collect();
    {
        let shape = bank.shape.as_mut().unwrap();
        for tri in shape.iter_mut() {
            tri.center_mel += rng.random_range(-20.0..20.0);
            tri.raw_width += rng.random_range(-0.2..0.2);
            let safe = |tri: &TriangleShape| {
                let w = tri.width_mel();
                bin_mels.iter().all(|&m| {
                    let u = (m - tri.center_mel).abs();
                    u > 10.0 * FD_STEP && (u - w).abs() > 10.0 * FD_STEP
                })
            };
            while !safe(tri) {
                tri.center_mel += 17.0 * FD_STEP;
            }
        }
        bank.rematerialize();
    }

    let t_frames = 3;
    let mag = Spectrogram::new(
        Mat::from_fn(t_frames, 241, |_, _| rng.random_range(0.0..2.0)),
        0.01,
    );
    let coeff = rand_mat(&mut rng, t_frames, 5, 1.0);
    let grads = mel_backward(&coeff, &mag, &bank, false).unwrap();
    let (d_center, d_raw) = match &grads.params {
        MelParamGrads::Shape {
            d_center_mel,
            d_raw_width,
        } => (d_center_mel.clone(), d_raw_width.clone()),
        _ => unreachable!(),
    };

    let loss = |shape: &[TriangleShape], mag: &Spectrogram| -> f64 {
        let weights = materialize_constrained(shape, 241, 8000.0);
        let mut bank2 = bank.clone();
        bank2.weights = weights;
        weighted_sum(&coeff, &mel_forward(mag, &bank2).unwrap().frames)
    };

    let shape = bank.shape.clone().unwrap();
    for j in 0..shape.len() {
        let mut s = shape.clone();
        s[j].center_mel += FD_STEP;
        let lp = loss(&s, &mag);
        s[j].center_mel -= 2.0 * FD_STEP;
        let lm = loss(&s, &mag);
        tracker.record(d_center[j], (lp - lm) / (2.0 * FD_STEP));

        let mut s = shape.clone();
        s[j].raw_width += FD_STEP;
        let lp = loss(&s, &mag);
        s[j].raw_width -= 2.0 * FD_STEP;
        let lm = loss(&s, &mag);
        tracker.record(d_raw[j], (lp - lm) / (2.0 * FD_STEP));
    }

    SuiteReport {
        name: "mel_constrained",
        max_rel_err: tracker.max,
        checks: tracker.n,
        tolerance: DEFAULT_TOL,
    }
}

/// Linear head gradients (weight, bias, input), every coordinate.
pub fn check_linear(seed: u64) -> SuiteReport {
    let mut tracker = ErrTracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c69);
    let mut head = LinearHead::uniform(3, 5, &mut rng);
    let mut x = Mat::from_fn(4, 5, |_, _| rng.random_range(-1.0..1.0));
    let coeff = rand_mat(&mut rng, 4, 3, 1.0);

    let (grads, d_input) = head.backward_mat(&coeff, &x).unwrap();
    let loss = |head: &LinearHead, x: &Mat| -> f64 {
        weighted_sum(&coeff, &head.forward_mat(x).unwrap())
    };

    for r in 0..3 {
        for c in 0..5 {
            let old = head.weight.get(r, c);
            head.weight.set(r, c, old + FD_STEP);
            let lp = loss(&head, &x);
            head.weight.set(r, c, old - FD_STEP);
            let lm = loss(&head, &x);
            head.weight.set(r, c, old);
            tracker.record(grads.d_weight.get(r, c), (lp - lm) / (2.0 * FD_STEP));
        }
    }
    for b in 0..3 {
        let old = head.bias[b];
        head.bias[b] = old + FD_STEP;
        let lp = loss(&head, &x);
        head.bias[b] = old - FD_STEP;
        let lm = loss(&head, &x);
        head.bias[b] = old;
        tracker.record(grads.d_bias[b], (lp - lm) / (2.0 * FD_STEP));
    }
    for r in 0..4 {
        for c in 0..5 {
            let old = x.get(r, c);
            x.set(r, c, old + FD_STEP);
            let lp = loss(&head, &x);
            x.set(r, c, old - FD_STEP);
            let lm = loss(&head, &x);
            x.set(r, c, old);
            tracker.record(d_input.get(r, c), (lp - lm) / (2.0 * FD_STEP));
        }
    }

    SuiteReport {
        name: "linear",
        max_rel_err: tracker.max,
        checks: tracker.n,
        tolerance: DEFAULT_TOL,
    }
}

/// LSTM gradients over all weights, biases, and inputs at several sequence
/// lengths.
pub fn check_lstm(seed: u64) -> SuiteReport {
    let mut tracker = ErrTracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c73);

    for &t_len in &[1usize, 2, 4, 7] {
        let mut layer = LstmLayer::init(3, 3, &mut rng);
        let mut x = Mat::from_fn(t_len, 3, |_, _| rng.random_range(-1.0..1.0));
        let coeff = rand_mat(&mut rng, t_len, 3, 1.0);

        let (_, cache) = layer.forward(&x).unwrap();
        let (grads, d_input) = layer.backward(&coeff, &cache).unwrap();
        let loss = |layer: &LstmLayer, x: &Mat| -> f64 {
            let (h, _) = layer.forward(x).unwrap();
            weighted_sum(&coeff, &h)
        };

        for r in 0..layer.weight.rows() {
            for c in 0..layer.weight.cols() {
                let old = layer.weight.get(r, c);
                layer.weight.set(r, c, old + FD_STEP);
                let lp = loss(&layer, &x);
                layer.weight.set(r, c, old - FD_STEP);
                let lm = loss(&layer, &x);
                layer.weight.set(r, c, old);
                tracker.record(grads.d_weight.get(r, c), (lp - lm) / (2.0 * FD_STEP));
            }
        }
        for b in 0..layer.bias.len() {
            let old = layer.bias[b];
            layer.bias[b] = old + FD_STEP;
            let lp = loss(&layer, &x);
            layer.bias[b] = old - FD_STEP;
            let lm = loss(&layer, &x);
            layer.bias[b] = old;
            tracker.record(grads.d_bias[b], (lp - lm) / (2.0 * FD_STEP));
        }
        for r in 0..t_len {
            for c in 0..3 {
                let old = x.get(r, c);
                x.set(r, c, old + FD_STEP);
                let lp = loss(&layer, &x);
                x.set(r, c, old - FD_STEP);
                let lm = loss(&layer, &x);
                x.set(r, c, old);
                tracker.record(d_input.get(r, c), (lp - lm) / (2.0 * FD_STEP));
            }
        }
    }

    SuiteReport {
        name: "lstm",
        max_rel_err: tracker.max,
        checks: tracker.n,
        tolerance: DEFAULT_TOL,
    }
}

/// Softmax cross-entropy logit gradients; the analytic form is exact, so
/// the tolerance is tighter here.
pub fn check_softmax_xent(seed: u64) -> SuiteReport {
    let mut tracker = ErrTracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7865);

    for _ in 0..20 {
        let c = rng.random_range(3..10usize);
        let mut logits: Vec<f64> = (0..c).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = rng.random_range(0..c);
        let (_, grad) = softmax_xent(&logits, label).unwrap();
        for i in 0..c {
            let old = logits[i];
            logits[i] = old + FD_STEP;
            let lp = softmax_xent(&logits, label).unwrap().0;
            logits[i] = old - FD_STEP;
            let lm = softmax_xent(&logits, label).unwrap().0;
            logits[i] = old;
            tracker.record(grad[i], (lp - lm) / (2.0 * FD_STEP));
        }
    }

    SuiteReport {
        name: "softmax_xent",
        max_rel_err: tracker.max,
        checks: tracker.n,
        tolerance: 1e-6,
    }
}

/// CTC gradients w.r.t. every log-probability coordinate on small random
/// instances.
pub fn check_ctc(seed: u64) -> SuiteReport {
    let mut tracker = ErrTracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6374);

    for case in 0..12 {
        let t_len = 3 + case % 4; // 3..=6
        let n_classes = 4;
        let blank = 3;
        let target_len = 1 + case % 2;
        let symbols: Vec<usize> = (0..target_len).map(|_| rng.random_range(0..blank)).collect();
        let target = CtcTarget::new(symbols).unwrap();
        if t_len < target.min_frames() {
            continue;
        }
        let logits = rand_mat(&mut rng, t_len, n_classes, 2.0);
        let mut log_probs = log_softmax_rows(&logits);
        let (_, grad) = ctc_loss(&log_probs, &target, blank).unwrap();

        for r in 0..t_len {
            for c in 0..n_classes {
                let old = log_probs.get(r, c);
                log_probs.set(r, c, old + FD_STEP);
                let lp = ctc_loss(&log_probs, &target, blank).unwrap().0;
                log_probs.set(r, c, old - FD_STEP);
                let lm = ctc_loss(&log_probs, &target, blank).unwrap().0;
                log_probs.set(r, c, old);
                tracker.record(grad.get(r, c), (lp - lm) / (2.0 * FD_STEP));
            }
        }
    }

    SuiteReport {
        name: "ctc",
        max_rel_err: tracker.max,
        checks: tracker.n,
        tolerance: DEFAULT_TOL,
    }
}

/// Run every suite with seeds derived from `seed`.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        check_stft(seed),
        check_mel_freeform(seed),
        check_mel_constrained(seed),
        check_linear(seed),
        check_lstm(seed),
        check_softmax_xent(seed),
        check_ctc(seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for report in run_all(0) {
            assert!(
                report.passed(),
                "{}: max rel err {:.3e} over {} checks (tol {:.0e})",
                report.name,
                report.max_rel_err,
                report.checks,
                report.tolerance
            );
        }
    }
}
