//! Deterministic train/eval splitting and class-rebalanced sampling.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the clip id; stable across platforms and releases, unlike
/// the standard library hasher.
pub fn fnv1a64(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// 80/20 hash split on clip ids. Returns `(train, eval)` index lists.
pub fn split_train_eval(ids: &[String]) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        if fnv1a64(id) % 5 == 0 {
            eval.push(i);
        } else {
            train.push(i);
        }
    }
    (train, eval)
}

/// Infinite index stream that samples classes uniformly (probability `1/C`
/// each) and then uniformly within the class, regardless of class sizes.
#[derive(Debug, Clone)]
pub struct WeightedSampler {
    per_class: Vec<Vec<usize>>,
    rng: ChaCha8Rng,
}

impl WeightedSampler {
    /// `per_class[c]` lists the dataset indices of class `c`. Every class
    /// must be nonempty.
    pub fn new(per_class: Vec<Vec<usize>>, seed: u64) -> Result<Self> {
        if per_class.is_empty() {
            return Err(Error::Config("sampler needs at least one class".into()));
        }
        for (c, idx) in per_class.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::Config(format!(
                    "class {c} has no clips in the training split"
                )));
            }
        }
        Ok(WeightedSampler {
            per_class,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn next_index(&mut self) -> usize {
        let c = self.rng.random_range(0..self.per_class.len());
        let within = &self.per_class[c];
        within[self.rng.random_range(0..within.len())]
    }
}

/// Uniform sampler over a fixed index list (used for the sequence task,
/// which has no class imbalance to correct).
#[derive(Debug, Clone)]
pub struct UniformSampler {
    indices: Vec<usize>,
    rng: ChaCha8Rng,
}

impl UniformSampler {
    pub fn new(indices: Vec<usize>, seed: u64) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Config("sampler needs at least one clip".into()));
        }
        Ok(UniformSampler {
            indices,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn next_index(&mut self) -> usize {
        self.indices[self.rng.random_range(0..self.indices.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rebalances_wildly_skewed_classes() {
        // Sizes {100, 1}: each class must still be drawn about half the time.
        let per_class = vec![(0..100).collect::<Vec<_>>(), vec![100]];
        let mut sampler = WeightedSampler::new(per_class, 0).unwrap();
        let mut minority = 0usize;
        let draws = 10_000;
        for _ in 0..draws {
            if sampler.next_index() == 100 {
                minority += 1;
            }
        }
        let freq = minority as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "minority frequency {freq}");
    }

    #[test]
    fn single_class_draws_only_from_it() {
        let mut sampler = WeightedSampler::new(vec![vec![3, 7, 9]], 1).unwrap();
        for _ in 0..100 {
            assert!([3, 7, 9].contains(&sampler.next_index()));
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let make = || WeightedSampler::new(vec![vec![0, 1], vec![2, 3, 4]], 42).unwrap();
        let mut a = make();
        let mut b = make();
        for _ in 0..1000 {
            assert_eq!(a.next_index(), b.next_index());
        }
    }

    #[test]
    fn empty_class_is_config_error() {
        assert!(WeightedSampler::new(vec![vec![0], vec![]], 0).is_err());
    }

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        let ids: Vec<String> = (0..500).map(|i| format!("synth:kws:0:{}:{}", i % 12, i)).collect();
        let (train, eval) = split_train_eval(&ids);
        assert_eq!(train.len() + eval.len(), ids.len());
        for i in &train {
            assert!(!eval.contains(i));
        }
        // Roughly 20% lands in eval.
        let frac = eval.len() as f64 / ids.len() as f64;
        assert!((0.1..0.3).contains(&frac), "eval fraction {frac}");
    }

    #[test]
    fn fnv_is_stable() {
        // Frozen reference values so the split never drifts.
        assert_eq!(fnv1a64(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64("a"), 0xaf63dc4c8601ec8c);
    }
}
