//! Task losses and sequence metrics: softmax cross-entropy for
//! classification, CTC for alignment-free sequence training, greedy CTC
//! decoding, and Levenshtein-based phone error rate.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Number of classes in the phoneme task: 61 phoneme labels plus one
/// separator, which plays the CTC blank.
pub const ASR_CLASSES: usize = 62;
pub const ASR_BLANK: usize = 61;

/// Label sequence for CTC training. Symbols must never equal the blank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtcTarget {
    pub symbols: Vec<usize>,
}

impl CtcTarget {
    pub fn new(symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidArgument("CTC target must be nonempty".into()));
        }
        Ok(CtcTarget { symbols })
    }

    /// Minimum number of frames any alignment needs: one per symbol plus a
    /// forced blank between adjacent repeats.
    pub fn min_frames(&self) -> usize {
        let repeats = self.symbols.windows(2).filter(|w| w[0] == w[1]).count();
        self.symbols.len() + repeats
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of a softmax classifier.
///
/// Returns the loss `-log softmax(logits)[label]` and its gradient w.r.t.
/// the logits, `softmax - onehot`.
pub fn softmax_xent(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&v| (v - m).exp()).sum::<f64>().ln() + m;
    let loss = log_sum - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(logits: &Mat) -> Mat {
    let mut out = logits.clone();
    for t in 0..out.rows() {
        let row = out.row_mut(t);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln() + m;
        for v in row.iter_mut() {
            *v -= log_sum;
        }
    }
    out
}

/// Backward through row-wise log-softmax:
/// `d_logits = upstream - softmax .* rowsum(upstream)`.
pub fn log_softmax_rows_backward(upstream: &Mat, log_probs: &Mat) -> Result<Mat> {
    if upstream.shape() != log_probs.shape() {
        return Err(Error::ContractViolation(
            "log_softmax backward: shape mismatch".into(),
        ));
    }
    let mut out = Mat::zeros(upstream.rows(), upstream.cols());
    for t in 0..upstream.rows() {
        let up = upstream.row(t);
        let lp = log_probs.row(t);
        let total: f64 = up.iter().sum();
        let o = out.row_mut(t);
        for ((o, &u), &l) in o.iter_mut().zip(up.iter()).zip(lp.iter()) {
            *o = u - l.exp() * total;
        }
    }
    Ok(out)
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// CTC loss and its exact gradient w.r.t. the per-frame log-probabilities.
///
/// `log_probs` is `T x C` with rows summing (in probability) to one; the
/// loss is `-log p(target)` summed over all blank-augmented monotonic
/// alignments, computed with a log-space forward-backward pass.
pub fn ctc_loss(log_probs: &Mat, target: &CtcTarget, blank: usize) -> Result<(f64, Mat)> {
    let (t_frames, n_classes) = log_probs.shape();
    if blank >= n_classes {
        return Err(Error::InvalidArgument(format!(
            "blank {blank} out of range for {n_classes} classes"
        )));
    }
    for &s in &target.symbols {
        if s == blank {
            return Err(Error::InvalidArgument("CTC target contains the blank".into()));
        }
        if s >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "CTC symbol {s} out of range for {n_classes} classes"
            )));
        }
    }
    let required = target.min_frames();
    if t_frames < required {
        return Err(Error::InfeasibleAlignment {
            required,
            frames: t_frames,
        });
    }
    // Guard against raw logits being passed in.
    for t in 0..t_frames {
        let row = log_probs.row(t);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln() + m;
        if lse.abs() > 1e-2 {
            return Err(Error::InvalidArgument(format!(
                "log_probs row {t} is not normalized (logsumexp = {lse:.3e})"
            )));
        }
    }

    // Blank-extended target: blank, s1, blank, s2, ..., sL, blank.
    let ext: Vec<usize> = {
        let mut e = Vec::with_capacity(2 * target.symbols.len() + 1);
        e.push(blank);
        for &s in &target.symbols {
            e.push(s);
            e.push(blank);
        }
        e
    };
    let s_len = ext.len();
    let neg = f64::NEG_INFINITY;

    // A skip from s-2 to s is allowed when s holds a label different from
    // the one two slots back.
    let can_skip: Vec<bool> = (0..s_len)
        .map(|s| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2])
        .collect();

    // Forward variables; alpha[t][s] includes log p_t(ext[s]).
    let mut alpha = Mat::from_vec(t_frames, s_len, vec![neg; t_frames * s_len]);
    alpha.set(0, 0, log_probs.get(0, ext[0]));
    if s_len > 1 {
        alpha.set(0, 1, log_probs.get(0, ext[1]));
    }
    for t in 1..t_frames {
        for s in 0..s_len {
            let mut acc = alpha.get(t - 1, s);
            if s >= 1 {
                acc = log_add(acc, alpha.get(t - 1, s - 1));
            }
            if can_skip[s] {
                acc = log_add(acc, alpha.get(t - 1, s - 2));
            }
            if acc != neg {
                alpha.set(t, s, acc + log_probs.get(t, ext[s]));
            }
        }
    }
    let mut log_p = alpha.get(t_frames - 1, s_len - 1);
    if s_len > 1 {
        log_p = log_add(log_p, alpha.get(t_frames - 1, s_len - 2));
    }
    if log_p == neg {
        // Unreachable when the feasibility precondition holds.
        return Err(Error::InfeasibleAlignment {
            required,
            frames: t_frames,
        });
    }

    // Backward variables; beta[t][s] also includes log p_t(ext[s]).
    let mut beta = Mat::from_vec(t_frames, s_len, vec![neg; t_frames * s_len]);
    beta.set(
        t_frames - 1,
        s_len - 1,
        log_probs.get(t_frames - 1, ext[s_len - 1]),
    );
    if s_len > 1 {
        beta.set(
            t_frames - 1,
            s_len - 2,
            log_probs.get(t_frames - 1, ext[s_len - 2]),
        );
    }
    for t in (0..t_frames - 1).rev() {
        for s in 0..s_len {
            let mut acc = beta.get(t + 1, s);
            if s + 1 < s_len {
                acc = log_add(acc, beta.get(t + 1, s + 1));
            }
            if s + 2 < s_len && can_skip[s + 2] {
                acc = log_add(acc, beta.get(t + 1, s + 2));
            }
            if acc != neg {
                beta.set(t, s, acc + log_probs.get(t, ext[s]));
            }
        }
    }

    // grad[t][c] = -sum_{s: ext[s]=c} exp(alpha + beta - log p_t(c) - log P).
    let mut grad = Mat::zeros(t_frames, n_classes);
    for t in 0..t_frames {
        let mut per_class = vec![neg; n_classes];
        for s in 0..s_len {
            let a = alpha.get(t, s);
            let b = beta.get(t, s);
            if a != neg && b != neg {
                per_class[ext[s]] = log_add(per_class[ext[s]], a + b);
            }
        }
        let g = grad.row_mut(t);
        for (c, slot) in g.iter_mut().enumerate() {
            if per_class[c] != neg {
                *slot = -(per_class[c] - log_probs.get(t, c) - log_p).exp();
            }
        }
    }

    Ok((-log_p, grad))
}

/// Per-frame argmax, collapse consecutive repeats, drop blanks.
pub fn greedy_ctc_decode(log_probs: &Mat, blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = usize::MAX;
    for t in 0..log_probs.rows() {
        let row = log_probs.row(t);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        if best != prev && best != blank {
            out.push(best);
        }
        prev = best;
    }
    out
}

/// Unit-cost Levenshtein distance.
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let (n, m) = (a.len(), b.len());
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            cur[j] = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Phone error rate in percent: `levenshtein(hyp, ref) / |ref| * 100`.
pub fn phone_error_rate(hyp: &[usize], reference: &[usize]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::InvalidArgument(
            "phone error rate needs a nonempty reference".into(),
        ));
    }
    Ok(levenshtein(hyp, reference) as f64 / reference.len() as f64 * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xent_uniform_logits_is_log_c() {
        let logits = vec![0.7; 12];
        let (loss, _) = softmax_xent(&logits, 3).unwrap();
        assert!((loss - (12.0_f64).ln()).abs() < 1e-12, "loss = {loss}");
    }

    #[test]
    fn xent_huge_margin_is_stable() {
        let mut logits = vec![0.0; 12];
        logits[5] = 1000.0;
        let (loss, grad) = softmax_xent(&logits, 5).unwrap();
        assert!(loss.is_finite());
        assert!(loss < 1e-9);
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn xent_bad_label_rejected() {
        assert!(softmax_xent(&[0.0; 4], 4).is_err());
    }

    #[test]
    fn xent_shift_invariance() {
        let logits = [0.3, -1.2, 2.0, 0.0, 0.7];
        let (l0, g0) = softmax_xent(&logits, 2).unwrap();
        let shifted: Vec<f64> = logits.iter().map(|v| v + 137.25).collect();
        let (l1, g1) = softmax_xent(&shifted, 2).unwrap();
        assert!((l0 - l1).abs() < 1e-12);
        for (a, b) in g0.iter().zip(g1.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax(&[1.0, -2.0, 0.5, 3.3]);
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    fn uniform_log_probs(t: usize, c: usize) -> Mat {
        Mat::from_vec(t, c, vec![-(c as f64).ln(); t * c])
    }

    #[test]
    fn ctc_single_frame_single_symbol() {
        // T=1, target {a}: only the path "a" exists.
        let lp = log_softmax_rows(&Mat::from_vec(1, 3, vec![0.2, 1.4, -0.3]));
        let target = CtcTarget::new(vec![1]).unwrap();
        let (loss, _) = ctc_loss(&lp, &target, 2).unwrap();
        assert!((loss + lp.get(0, 1)).abs() < 1e-12);
    }

    #[test]
    fn ctc_two_frames_single_symbol_closed_form() {
        // T=2, target {a}: alignments aa, a-, -a.
        let logits = Mat::from_vec(2, 3, vec![0.2, -0.7, 1.1, -0.4, 0.9, 0.3]);
        let lp = log_softmax_rows(&logits);
        let blank = 2;
        let a = 0;
        let target = CtcTarget::new(vec![a]).unwrap();
        let (loss, _) = ctc_loss(&lp, &target, blank).unwrap();
        let p1a = lp.get(0, a).exp();
        let p2a = lp.get(1, a).exp();
        let p1b = lp.get(0, blank).exp();
        let p2b = lp.get(1, blank).exp();
        let want = -(p1a * p2a + p1a * p2b + p1b * p2a).ln();
        assert!((loss - want).abs() < 1e-12, "{loss} vs {want}");
    }

    #[test]
    fn ctc_infeasible_target_is_an_error() {
        let lp = uniform_log_probs(2, 4);
        let target = CtcTarget::new(vec![0, 0]).unwrap(); // needs 3 frames
        match ctc_loss(&lp, &target, 3) {
            Err(Error::InfeasibleAlignment { required, frames }) => {
                assert_eq!(required, 3);
                assert_eq!(frames, 2);
            }
            other => panic!("expected infeasible alignment, got {other:?}"),
        }
    }

    #[test]
    fn ctc_rejects_blank_in_target_and_raw_logits() {
        let lp = uniform_log_probs(3, 4);
        assert!(ctc_loss(&lp, &CtcTarget::new(vec![3]).unwrap(), 3).is_err());
        let raw = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 0.0, 0.0, 1.0]);
        assert!(ctc_loss(&raw, &CtcTarget::new(vec![0]).unwrap(), 2).is_err());
    }

    #[test]
    fn greedy_decode_collapse_rules() {
        let blank = 2;
        // Log-prob rows whose argmax follows a given frame sequence.
        let seq_to_lp = |seq: &[usize]| {
            Mat::from_fn(seq.len(), 3, |t, c| if c == seq[t] { -0.1 } else { -3.0 })
        };
        // a a - a -> a a
        assert_eq!(greedy_ctc_decode(&seq_to_lp(&[0, 0, 2, 0]), blank), vec![0, 0]);
        // all blank -> empty
        assert!(greedy_ctc_decode(&seq_to_lp(&[2, 2, 2]), blank).is_empty());
        // a - b b -> a b
        assert_eq!(greedy_ctc_decode(&seq_to_lp(&[0, 2, 1, 1]), blank), vec![0, 1]);
    }

    #[test]
    fn per_basic_cases() {
        let r = [1, 2, 3];
        assert_eq!(phone_error_rate(&r, &r).unwrap(), 0.0);
        assert_eq!(phone_error_rate(&[], &[5, 6, 7, 8]).unwrap(), 100.0);
        let got = phone_error_rate(&[1, 9, 3], &[1, 2, 3]).unwrap();
        assert!((got - 100.0 / 3.0).abs() < 1e-9);
        assert!(phone_error_rate(&[1], &[]).is_err());
    }

    #[test]
    fn log_softmax_backward_matches_direct_formula() {
        let logits = Mat::from_vec(2, 3, vec![0.1, -0.4, 0.9, 1.2, 0.0, -0.8]);
        let lp = log_softmax_rows(&logits);
        let up = Mat::from_vec(2, 3, vec![0.3, -1.0, 0.25, 0.0, 2.0, -0.5]);
        let got = log_softmax_rows_backward(&up, &lp).unwrap();
        for t in 0..2 {
            let total: f64 = up.row(t).iter().sum();
            for c in 0..3 {
                let want = up.get(t, c) - lp.get(t, c).exp() * total;
                assert!((got.get(t, c) - want).abs() < 1e-12);
            }
        }
    }
}
