//! Analysis windows.

use crate::error::{Error, Result};

/// Periodic Hann window: `w[k] = 0.5 * (1 - cos(2*pi*k/n))`.
pub fn make_hann_window(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("hann window length must be >= 1".into()));
    }
    let step = 2.0 * std::f64::consts::PI / n as f64;
    Ok((0..n).map(|k| 0.5 * (1.0 - (step * k as f64).cos())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hann_480_endpoints_and_sum() {
        let w = make_hann_window(480).unwrap();
        assert_eq!(w[0], 0.0);
        assert!((w[240] - 1.0).abs() < 1e-15);
        // Cosine terms cancel over a full period, so the taps sum to n/2.
        let sum: f64 = w.iter().sum();
        assert!((sum - 240.0).abs() < 1e-9, "sum = {sum}");
    }

    #[test]
    fn hann_4_closed_form() {
        let w = make_hann_window(4).unwrap();
        let want = [0.0, 0.5, 1.0, 0.5];
        for (a, b) in w.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hann_zero_length_rejected() {
        assert!(make_hann_window(0).is_err());
    }
}
