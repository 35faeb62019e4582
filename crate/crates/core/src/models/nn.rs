//! Shared pieces for the gradient-trained models: activations, softmax
//! cross-entropy, fan-in initialization, and the Adagrad-style optimizer.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn relu_grad(pre: f64) -> f64 {
    if pre > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of a softmax output against an integer target.
pub fn cross_entropy(probs: &[f64], target: usize) -> f64 {
    -probs[target].ln()
}

/// Index of the largest score; ties break toward the lowest index.
pub fn argmax_tie_low(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Uniform init scaled by fan-in: `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn init_uniform(rng: &mut ChaCha8Rng, out: &mut [f64], fan_in: usize) {
    let limit = 1.0 / (fan_in as f64).sqrt();
    for v in out.iter_mut() {
        *v = rng.random_range(-limit..limit);
    }
}

/// Mini-batch gradient descent with per-parameter adaptive scaling:
/// the accumulator collects squared gradients and each parameter moves by
/// `lr * g / (sqrt(accum) + eps)`. Accumulators start at 0.1 (the common
/// framework default), which keeps the first steps proportional to the
/// gradient instead of jumping a full learning-rate unit per parameter.
#[derive(Debug, Clone)]
pub struct Adagrad {
    accum: Vec<f64>,
    pub learning_rate: f64,
    pub epsilon: f64,
}

impl Adagrad {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self { accum: vec![0.1; n_params], learning_rate, epsilon: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), grads.len());
        debug_assert_eq!(params.len(), self.accum.len());
        for ((p, g), a) in params.iter_mut().zip(grads.iter()).zip(self.accum.iter_mut()) {
            *a += g * g;
            *p -= self.learning_rate * g / (a.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        assert_eq!(p, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_tie_low(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(argmax_tie_low(&[0.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn zero_learning_rate_leaves_params_bitwise_unchanged() {
        let mut params = vec![0.123456789, -3.25, 7.5e-3];
        let snapshot = params.clone();
        let mut opt = Adagrad::new(3, 0.0);
        opt.step(&mut params, &[1.0, -2.0, 0.5]);
        for (a, b) in params.iter().zip(snapshot.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    proptest! {
        #[test]
        fn softmax_is_a_probability_simplex(logits in proptest::collection::vec(-30.0f64..30.0, 3)) {
            let p = softmax(&logits);
            prop_assert!(p.iter().all(|v| *v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn argmax_invariant_under_positive_scaling(
            scores in proptest::collection::vec(-10.0f64..10.0, 3),
            c in 1e-3f64..1e3,
        ) {
            let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
            prop_assert_eq!(argmax_tie_low(&scores), argmax_tie_low(&scaled));
        }
    }
}
