//! Fully connected network: dense layers with ReLU hidden activations and a
//! softmax output, trained by backpropagation of the cross-entropy loss.
//!
//! Parameters live in one flat vector laid out `[W1 | b1 | W2 | b2 | ...]`
//! with weights row-major `out x in`, which keeps the optimizer, gradient
//! checking, and serialization uniform.

use super::nn::{argmax_tie_low, cross_entropy, relu, relu_grad, softmax, Adagrad};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Layer sizes of the default architecture (11 inputs, two hidden layers of
/// 450, 3 classes).
pub const DEFAULT_DIMS: [usize; 4] = [11, 450, 450, 3];

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// One labeled training example: input vector and class index.
pub type Example = (Vec<f64>, usize);

impl MlpModel {
    /// Seeded fan-in uniform weight init, zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        Self::validate_dims(dims)?;
        let mut model = Self { dims: dims.to_vec(), params: vec![0.0; Self::count_params(dims)] };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..model.layer_count() {
            let (w_off, w_len, _, _) = model.layer_offsets(l);
            super::nn::init_uniform(&mut rng, &mut model.params[w_off..w_off + w_len], dims[l]);
        }
        Ok(model)
    }

    /// All weights and biases zero (softmax then outputs exactly 1/k each).
    pub fn zeroed(dims: &[usize]) -> Result<Self> {
        Self::validate_dims(dims)?;
        Ok(Self { dims: dims.to_vec(), params: vec![0.0; Self::count_params(dims)] })
    }

    pub fn from_parts(dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        Self::validate_dims(&dims)?;
        if params.len() != Self::count_params(&dims) {
            return Err(Error::Format(format!(
                "parameter blob length {} does not match architecture (expected {})",
                params.len(),
                Self::count_params(&dims)
            )));
        }
        Ok(Self { dims, params })
    }

    fn validate_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.iter().any(|d| *d == 0) {
            return Err(Error::Parameter(format!("invalid layer sizes {dims:?}")));
        }
        Ok(())
    }

    fn count_params(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    /// (weight offset, weight len, bias offset, bias len) of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut off = 0;
        for i in 0..l {
            off += self.dims[i] * self.dims[i + 1] + self.dims[i + 1];
        }
        let w_len = self.dims[l] * self.dims[l + 1];
        (off, w_len, off + w_len, self.dims[l + 1])
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Parameter(format!(
                "input dimension {} does not match network input {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Softmax class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (_, _, logits) = self.forward_trace(x);
        Ok(softmax(&logits))
    }

    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let probs = self.forward(x)?;
        Ok((argmax_tie_low(&probs), probs))
    }

    /// Runs the network keeping pre-activations and activations per layer.
    /// Returns (pre-activations, hidden activations, output logits).
    fn forward_trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let last = self.layer_count() - 1;
        let mut pres = Vec::with_capacity(self.layer_count());
        let mut acts = Vec::with_capacity(self.layer_count());
        let mut a = x.to_vec();
        let mut logits = Vec::new();
        for l in 0..self.layer_count() {
            let (w_off, _, b_off, out_d) = self.layer_offsets(l);
            let in_d = self.dims[l];
            let mut z = vec![0.0; out_d];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &self.params[w_off + o * in_d..w_off + (o + 1) * in_d];
                let mut acc = self.params[b_off + o];
                for (w, v) in row.iter().zip(a.iter()) {
                    acc += w * v;
                }
                *zo = acc;
            }
            pres.push(z.clone());
            if l < last {
                let h: Vec<f64> = z.iter().map(|v| relu(*v)).collect();
                acts.push(h.clone());
                a = h;
            } else {
                logits = z;
            }
        }
        (pres, acts, logits)
    }

    /// Smallest |pre-activation| over the batch's hidden units: how far this
    /// input set sits from a ReLU kink, where finite differences of the loss
    /// stop being a valid derivative estimate.
    pub fn activation_kink_margin(&self, batch: &[Example]) -> Result<f64> {
        let last = self.layer_count() - 1;
        let mut margin = f64::INFINITY;
        for (x, _) in batch {
            self.check_input(x)?;
            let (pres, _, _) = self.forward_trace(x);
            for pre in pres.iter().take(last) {
                for v in pre {
                    margin = margin.min(v.abs());
                }
            }
        }
        Ok(margin)
    }

    /// Mean cross-entropy loss over a batch (the quantity backprop
    /// differentiates; used directly by finite-difference checks).
    pub fn loss(&self, batch: &[Example]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        let mut total = 0.0;
        for (x, y) in batch {
            self.check_input(x)?;
            let (_, _, logits) = self.forward_trace(x);
            total += cross_entropy(&softmax(&logits), *y);
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean-reduced gradients of the batch cross-entropy with respect to
    /// every parameter, plus the loss itself.
    pub fn backprop(&self, batch: &[Example]) -> Result<(Vec<f64>, f64)> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut total_loss = 0.0;
        let last = self.layer_count() - 1;
        for (x, y) in batch {
            self.check_input(x)?;
            let (pres, acts, logits) = self.forward_trace(x);
            let probs = softmax(&logits);
            total_loss += cross_entropy(&probs, *y);

            // dL/dz for the softmax + cross-entropy head
            let mut delta: Vec<f64> = probs;
            delta[*y] -= 1.0;

            for l in (0..=last).rev() {
                let (w_off, _, b_off, out_d) = self.layer_offsets(l);
                let in_d = self.dims[l];
                let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
                for o in 0..out_d {
                    let d = delta[o];
                    grads[b_off + o] += d;
                    let row = &mut grads[w_off + o * in_d..w_off + (o + 1) * in_d];
                    for (g, v) in row.iter_mut().zip(input.iter()) {
                        *g += d * v;
                    }
                }
                if l > 0 {
                    let mut prev = vec![0.0; in_d];
                    for o in 0..out_d {
                        let d = delta[o];
                        let row = &self.params[w_off + o * in_d..w_off + (o + 1) * in_d];
                        for (p, w) in prev.iter_mut().zip(row.iter()) {
                            *p += d * w;
                        }
                    }
                    for (p, z) in prev.iter_mut().zip(pres[l - 1].iter()) {
                        *p *= relu_grad(*z);
                    }
                    delta = prev;
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for g in grads.iter_mut() {
            *g *= scale;
        }
        Ok((grads, total_loss * scale))
    }
}

/// One optimizer step on a mini-batch; returns the batch loss.
pub fn backprop_step(model: &mut MlpModel, opt: &mut Adagrad, batch: &[Example]) -> Result<f64> {
    let (grads, loss) = model.backprop(batch)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }
    opt.step(model.params_mut(), &grads);
    Ok(loss)
}
