//! Random-guess reference classifier.
//!
//! "Training" stores only the class count and seed. Prediction draws the
//! class from a seeded hash of the input bytes, so a given model is a pure
//! function (identical input, identical output) while distinct inputs spread
//! uniformly over the classes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomModel {
    pub seed: u64,
    pub n_classes: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomModel {
    pub fn new(seed: u64, n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::Parameter("need at least one class".into()));
        }
        Ok(Self { seed, n_classes })
    }

    pub fn predict(&self, values: &[f64]) -> (usize, Vec<f64>) {
        let mut state = splitmix64(self.seed);
        for v in values {
            state = splitmix64(state ^ v.to_bits());
        }
        let class = (state % self.n_classes as u64) as usize;
        let mut scores = vec![0.0; self.n_classes];
        scores[class] = 1.0;
        (class, scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies_concentrate_at_one_third() {
        let model = RandomModel::new(42, 3).unwrap();
        let mut counts = [0usize; 3];
        let n = 100_000;
        for i in 0..n {
            let x = [i as f64 * 0.001, (i % 97) as f64, -(i as f64)];
            counts[model.predict(&x).0] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 1.0 / 3.0).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn prediction_is_a_pure_function() {
        let model = RandomModel::new(7, 3).unwrap();
        let x = [0.25, -1.5, 3.75];
        let first = model.predict(&x);
        for _ in 0..10 {
            assert_eq!(model.predict(&x), first.clone());
        }
    }

    #[test]
    fn label_is_argmax_of_scores() {
        let model = RandomModel::new(1, 3).unwrap();
        for i in 0..50 {
            let (label, scores) = model.predict(&[i as f64]);
            assert_eq!(scores[label], 1.0);
            assert_eq!(scores.iter().sum::<f64>(), 1.0);
        }
    }
}
