//! Convolutional network for window maps: two valid 3x3 conv layers with a
//! 2x2 max-pool between them, then a small dense head with softmax output.
//!
//! Default shape pipeline (input 20x11x1):
//! `20x11x1 -> 18x9x32 -> 9x4x32 -> 7x2x64 -> 896 -> 32 -> 3`
//!
//! Activations are laid out `[row][col][channel]`; parameters live in one
//! flat vector `[conv1_w | conv1_b | conv2_w | conv2_b | fc1_w | fc1_b |
//! fc2_w | fc2_b]` with conv weights indexed `[filter][in_ch][kr][kc]`.

use super::nn::{argmax_tie_low, cross_entropy, relu, relu_grad, softmax, Adagrad};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnArch {
    pub input_h: usize,
    pub input_w: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dense: usize,
    pub classes: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        Self {
            input_h: 20,
            input_w: 11,
            conv1_filters: 32,
            conv2_filters: 64,
            kernel: 3,
            pool: 2,
            dense: 32,
            classes: 3,
        }
    }
}

impl CnnArch {
    /// All intermediate shapes as (h, w, channels), input through conv2.
    pub fn shape_pipeline(&self) -> Result<Vec<(usize, usize, usize)>> {
        let k = self.kernel;
        if self.input_h < k || self.input_w < k {
            return Err(Error::Parameter("input smaller than kernel".into()));
        }
        let c1 = (self.input_h - k + 1, self.input_w - k + 1, self.conv1_filters);
        let p = (c1.0 / self.pool, c1.1 / self.pool, self.conv1_filters);
        if p.0 < k || p.1 < k {
            return Err(Error::Parameter("pooled map smaller than kernel".into()));
        }
        let c2 = (p.0 - k + 1, p.1 - k + 1, self.conv2_filters);
        Ok(vec![(self.input_h, self.input_w, 1), c1, p, c2])
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let shapes = self.shape_pipeline()?;
        let (h, w, c) = shapes[3];
        Ok(h * w * c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    arch: CnnArch,
    params: Vec<f64>,
}

pub type WindowExample = (Vec<f64>, usize);

struct Layout {
    conv1_w: usize,
    conv1_b: usize,
    conv2_w: usize,
    conv2_b: usize,
    fc1_w: usize,
    fc1_b: usize,
    fc2_w: usize,
    fc2_b: usize,
    total: usize,
}

impl CnnModel {
    pub fn new(arch: CnnArch, seed: u64) -> Result<Self> {
        arch.shape_pipeline()?;
        let layout = Self::layout_of(&arch)?;
        let mut model = Self { arch, params: vec![0.0; layout.total] };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k2 = arch.kernel * arch.kernel;
        let l = Self::layout_of(&arch)?;
        super::nn::init_uniform(&mut rng, &mut model.params[l.conv1_w..l.conv1_b], k2);
        super::nn::init_uniform(
            &mut rng,
            &mut model.params[l.conv2_w..l.conv2_b],
            k2 * arch.conv1_filters,
        );
        let flat = arch.flatten_len()?;
        super::nn::init_uniform(&mut rng, &mut model.params[l.fc1_w..l.fc1_b], flat);
        super::nn::init_uniform(&mut rng, &mut model.params[l.fc2_w..l.fc2_b], arch.dense);
        Ok(model)
    }

    pub fn zeroed(arch: CnnArch) -> Result<Self> {
        let layout = Self::layout_of(&arch)?;
        Ok(Self { arch, params: vec![0.0; layout.total] })
    }

    pub fn from_parts(arch: CnnArch, params: Vec<f64>) -> Result<Self> {
        let layout = Self::layout_of(&arch)?;
        if params.len() != layout.total {
            return Err(Error::Format(format!(
                "parameter blob length {} does not match architecture (expected {})",
                params.len(),
                layout.total
            )));
        }
        Ok(Self { arch, params })
    }

    fn layout_of(arch: &CnnArch) -> Result<Layout> {
        let flat = arch.flatten_len()?;
        let k2 = arch.kernel * arch.kernel;
        let conv1_w = 0;
        let conv1_b = conv1_w + arch.conv1_filters * k2;
        let conv2_w = conv1_b + arch.conv1_filters;
        let conv2_b = conv2_w + arch.conv2_filters * arch.conv1_filters * k2;
        let fc1_w = conv2_b + arch.conv2_filters;
        let fc1_b = fc1_w + arch.dense * flat;
        let fc2_w = fc1_b + arch.dense;
        let fc2_b = fc2_w + arch.classes * arch.dense;
        let total = fc2_b + arch.classes;
        Ok(Layout { conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b, total })
    }

    pub fn arch(&self) -> &CnnArch {
        &self.arch
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

    fn check_input(&self, window: &[f64]) -> Result<()> {
        let expected = self.arch.input_h * self.arch.input_w;
        if window.len() != expected {
            return Err(Error::Parameter(format!(
                "window has {} values, model expects {}x{}",
                window.len(),
                self.arch.input_h,
                self.arch.input_w
            )));
        }
        Ok(())
    }

    /// Softmax class probabilities for one row-major `input_h x input_w` window.
    pub fn forward(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_input(window)?;
        Ok(softmax(&self.trace(window).logits))
    }

    pub fn predict(&self, window: &[f64]) -> Result<(usize, Vec<f64>)> {
        let probs = self.forward(window)?;
        Ok((argmax_tie_low(&probs), probs))
    }

    pub fn loss(&self, batch: &[WindowExample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        let mut total = 0.0;
        for (x, y) in batch {
            self.check_input(x)?;
            total += cross_entropy(&softmax(&self.trace(x).logits), *y);
        }
        Ok(total / batch.len() as f64)
    }

    /// Distance of this batch from the network's non-differentiable points:
    /// the smallest |pre-activation| across ReLU inputs, and the smallest
    /// winner-vs-runner-up gap across active max-pool windows. Finite
    /// differences are only trustworthy when this margin dwarfs the step.
    pub fn activation_kink_margin(&self, batch: &[WindowExample]) -> Result<f64> {
        let shapes = self.arch.shape_pipeline()?;
        let (_, c1w, f1) = shapes[1];
        let (ph, pw, _) = shapes[2];
        let p = self.arch.pool;
        let mut margin = f64::INFINITY;
        for (x, _) in batch {
            self.check_input(x)?;
            let t = self.trace(x);
            for v in t.pre1.iter().chain(t.pre2.iter()).chain(t.fc1_pre.iter()) {
                margin = margin.min(v.abs());
            }
            for r in 0..ph {
                for c in 0..pw {
                    for ch in 0..f1 {
                        let mut winner = f64::NEG_INFINITY;
                        let mut runner_up = f64::NEG_INFINITY;
                        for dr in 0..p {
                            for dc in 0..p {
                                let v = relu(
                                    t.pre1[((r * p + dr) * c1w + (c * p + dc)) * f1 + ch],
                                );
                                if v > winner {
                                    runner_up = winner;
                                    winner = v;
                                } else if v > runner_up {
                                    runner_up = v;
                                }
                            }
                        }
                        // a window of all-dead units is smooth; only active
                        // winners can lose their argmax under perturbation
                        if winner > 0.0 && runner_up > f64::NEG_INFINITY {
                            margin = margin.min(winner - runner_up);
                        }
                    }
                }
            }
        }
        Ok(margin)
    }

    fn conv_forward(
        &self,
        input: &[f64],
        shape: (usize, usize, usize),
        filters: usize,
        w_off: usize,
        b_off: usize,
    ) -> Vec<f64> {
        conv2d_valid(
            input,
            shape,
            filters,
            self.arch.kernel,
            &self.params[w_off..],
            &self.params[b_off..b_off + filters],
        )
    }

    fn trace(&self, window: &[f64]) -> Trace {
        let layout = Self::layout_of(&self.arch).expect("validated at construction");
        let shapes = self.arch.shape_pipeline().expect("validated at construction");
        let (_, c1w, f1) = shapes[1];
        let (ph, pw, _) = shapes[2];
        let (c2h, c2w, f2) = shapes[3];
        let p = self.arch.pool;

        let pre1 =
            self.conv_forward(window, shapes[0], f1, layout.conv1_w, layout.conv1_b);
        let act1: Vec<f64> = pre1.iter().map(|v| relu(*v)).collect();

        // max-pool with argmax memo for the backward pass
        let mut pooled = vec![0.0; ph * pw * f1];
        let mut argmax = vec![0usize; ph * pw * f1];
        for r in 0..ph {
            for c in 0..pw {
                for ch in 0..f1 {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for dr in 0..p {
                        for dc in 0..p {
                            let idx = ((r * p + dr) * c1w + (c * p + dc)) * f1 + ch;
                            if act1[idx] > best {
                                best = act1[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    pooled[(r * pw + c) * f1 + ch] = best;
                    argmax[(r * pw + c) * f1 + ch] = best_idx;
                }
            }
        }

        let pre2 = self.conv_forward(&pooled, (ph, pw, f1), f2, layout.conv2_w, layout.conv2_b);
        let act2: Vec<f64> = pre2.iter().map(|v| relu(*v)).collect();
        debug_assert_eq!(act2.len(), c2h * c2w * f2);

        let mut fc1_pre = vec![0.0; self.arch.dense];
        for (o, z) in fc1_pre.iter_mut().enumerate() {
            let mut acc = self.params[layout.fc1_b + o];
            let row = &self.params
                [layout.fc1_w + o * act2.len()..layout.fc1_w + (o + 1) * act2.len()];
            for (w, v) in row.iter().zip(act2.iter()) {
                acc += w * v;
            }
            *z = acc;
        }
        let fc1_act: Vec<f64> = fc1_pre.iter().map(|v| relu(*v)).collect();

        let mut logits = vec![0.0; self.arch.classes];
        for (o, z) in logits.iter_mut().enumerate() {
            let mut acc = self.params[layout.fc2_b + o];
            let row = &self.params
                [layout.fc2_w + o * self.arch.dense..layout.fc2_w + (o + 1) * self.arch.dense];
            for (w, v) in row.iter().zip(fc1_act.iter()) {
                acc += w * v;
            }
            *z = acc;
        }

        Trace { pre1, pooled, argmax, pre2, act2, fc1_pre, fc1_act, logits }
    }

    /// Mean-reduced gradients of the batch cross-entropy plus the loss.
    pub fn backprop(&self, batch: &[WindowExample]) -> Result<(Vec<f64>, f64)> {
        if batch.is_empty() {
            return Err(Error::Parameter("empty batch".into()));
        }
        let layout = Self::layout_of(&self.arch)?;
        let shapes = self.arch.shape_pipeline()?;
        let (c1h, c1w, f1) = shapes[1];
        let (ph, pw, _) = shapes[2];
        let (c2h, c2w, f2) = shapes[3];
        let k = self.arch.kernel;

        let mut grads = vec![0.0; self.params.len()];
        let mut total_loss = 0.0;

        for (x, y) in batch {
            self.check_input(x)?;
            let t = self.trace(x);
            let probs = softmax(&t.logits);
            total_loss += cross_entropy(&probs, *y);

            let mut d_logits = probs;
            d_logits[*y] -= 1.0;

            // fc2
            let mut d_fc1_act = vec![0.0; self.arch.dense];
            for (o, d) in d_logits.iter().enumerate() {
                grads[layout.fc2_b + o] += d;
                for i in 0..self.arch.dense {
                    grads[layout.fc2_w + o * self.arch.dense + i] += d * t.fc1_act[i];
                    d_fc1_act[i] += d * self.params[layout.fc2_w + o * self.arch.dense + i];
                }
            }

            // fc1
            let flat = t.act2.len();
            let mut d_act2 = vec![0.0; flat];
            for o in 0..self.arch.dense {
                let d = d_fc1_act[o] * relu_grad(t.fc1_pre[o]);
                grads[layout.fc1_b + o] += d;
                for i in 0..flat {
                    grads[layout.fc1_w + o * flat + i] += d * t.act2[i];
                    d_act2[i] += d * self.params[layout.fc1_w + o * flat + i];
                }
            }

            // conv2
            let mut d_pooled = vec![0.0; ph * pw * f1];
            for r in 0..c2h {
                for c in 0..c2w {
                    for f in 0..f2 {
                        let d = d_act2[(r * c2w + c) * f2 + f]
                            * relu_grad(t.pre2[(r * c2w + c) * f2 + f]);
                        if d == 0.0 {
                            continue;
                        }
                        grads[layout.conv2_b + f] += d;
                        for ic in 0..f1 {
                            for kr in 0..k {
                                for kc in 0..k {
                                    let in_idx = ((r + kr) * pw + (c + kc)) * f1 + ic;
                                    let w_idx =
                                        layout.conv2_w + ((f * f1 + ic) * k + kr) * k + kc;
                                    grads[w_idx] += d * t.pooled[in_idx];
                                    d_pooled[in_idx] += d * self.params[w_idx];
                                }
                            }
                        }
                    }
                }
            }

            // unpool: gradient routes to the recorded argmax position
            let mut d_act1 = vec![0.0; c1h * c1w * f1];
            for (pool_idx, d) in d_pooled.iter().enumerate() {
                if *d != 0.0 {
                    d_act1[t.argmax[pool_idx]] += d;
                }
            }

            // conv1
            for r in 0..c1h {
                for c in 0..c1w {
                    for f in 0..f1 {
                        let d = d_act1[(r * c1w + c) * f1 + f]
                            * relu_grad(t.pre1[(r * c1w + c) * f1 + f]);
                        if d == 0.0 {
                            continue;
                        }
                        grads[layout.conv1_b + f] += d;
                        for kr in 0..k {
                            for kc in 0..k {
                                let in_idx = (r + kr) * self.arch.input_w + (c + kc);
                                let w_idx = layout.conv1_w + (f * k + kr) * k + kc;
                                grads[w_idx] += d * x[in_idx];
                            }
                        }
                    }
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

struct Trace {
    pre1: Vec<f64>,
    pooled: Vec<f64>,
    argmax: Vec<usize>,
    pre2: Vec<f64>,
    act2: Vec<f64>,
    fc1_pre: Vec<f64>,
    fc1_act: Vec<f64>,
    logits: Vec<f64>,
}

/// Valid (no padding) 2-D convolution over a `[row][col][channel]` input.
/// Weights are indexed `[filter][in_ch][kr][kc]`, one bias per filter; the
/// output is `[out_row][out_col][filter]` with `out = in - k + 1` per axis.
pub fn conv2d_valid(
    input: &[f64],
    (in_h, in_w, in_c): (usize, usize, usize),
    filters: usize,
    k: usize,
    weights: &[f64],
    biases: &[f64],
) -> Vec<f64> {
    let (out_h, out_w) = (in_h - k + 1, in_w - k + 1);
    let mut out = vec![0.0; out_h * out_w * filters];
    for r in 0..out_h {
        for c in 0..out_w {
            for f in 0..filters {
                let mut acc = biases[f];
                for ic in 0..in_c {
                    for kr in 0..k {
                        for kc in 0..k {
                            let iv = input[((r + kr) * in_w + (c + kc)) * in_c + ic];
                            let wv = weights[((f * in_c + ic) * k + kr) * k + kc];
                            acc += iv * wv;
                        }
                    }
                }
                out[(r * out_w + c) * filters + f] = acc;
            }
        }
    }
    out
}

/// One optimizer step on a mini-batch of windows; returns the batch loss.
pub fn backprop_step(
    model: &mut CnnModel,
    opt: &mut Adagrad,
    batch: &[WindowExample],
) -> Result<f64> {
    let (grads, loss) = model.backprop(batch)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }
    opt.step(model.params_mut(), &grads);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape_pipeline_matches_layer_arithmetic() {
        let arch = CnnArch::default();
        let shapes = arch.shape_pipeline().unwrap();
        assert_eq!(shapes, vec![(20, 11, 1), (18, 9, 32), (9, 4, 32), (7, 2, 64)]);
        assert_eq!(arch.flatten_len().unwrap(), 896);
    }

    #[test]
    fn zeroed_model_outputs_uniform_scores() {
        let model = CnnModel::zeroed(CnnArch::default()).unwrap();
        let probs = model.forward(&[0.0; 220]).unwrap();
        assert_eq!(probs, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn shape_mismatch_is_parameter_error() {
        let model = CnnModel::new(CnnArch::default(), 1).unwrap();
        assert!(matches!(model.forward(&[0.0; 100]), Err(Error::Parameter(_))));
    }

    fn small_arch() -> CnnArch {
        CnnArch {
            input_h: 8,
            input_w: 8,
            conv1_filters: 3,
            conv2_filters: 4,
            kernel: 3,
            pool: 2,
            dense: 6,
            classes: 3,
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        use rand::Rng;
        let mut worst: f64 = 0.0;
        for seed in 0..3u64 {
            let mut model = CnnModel::new(small_arch(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
            let batch: Vec<WindowExample> = (0..2)
                .map(|_| {
                    let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
                    (x, rng.random_range(0..3))
                })
                .collect();
            let (grads, _) = model.backprop(&batch).unwrap();
            let eps = 1e-5;
            for i in 0..model.param_count() {
                let orig = model.params()[i];
                model.params_mut()[i] = orig + eps;
                let up = model.loss(&batch).unwrap();
                model.params_mut()[i] = orig - eps;
                let down = model.loss(&batch).unwrap();
                model.params_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let denom = grads[i].abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((grads[i] - numeric).abs() / denom);
            }
        }
        assert!(worst < 1e-4, "max relative gradient error {worst}");
    }

    #[test]
    fn single_filter_conv_gradient_check_on_4x4_input() {
        // isolated conv layer, 4x4 input, one 3x3 filter; the scalar loss is
        // the sum of squared outputs, whose analytic weight gradient is
        // dL/dw[kr][kc] = sum_out 2*out[r][c] * in[r+kr][c+kc]
        let input: Vec<f64> = (0..16).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let mut params: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) / 10.0).collect();
        let loss = |p: &[f64]| -> f64 {
            conv2d_valid(&input, (4, 4, 1), 1, 3, &p[..9], &p[9..])
                .iter()
                .map(|v| v * v)
                .sum()
        };
        let out = conv2d_valid(&input, (4, 4, 1), 1, 3, &params[..9], &params[9..]);
        let mut analytic = [0.0; 10];
        for r in 0..2 {
            for c in 0..2 {
                let d = 2.0 * out[r * 2 + c];
                for kr in 0..3 {
                    for kc in 0..3 {
                        analytic[kr * 3 + kc] += d * input[(r + kr) * 4 + (c + kc)];
                    }
                }
                analytic[9] += d;
            }
        }
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..params.len() {
            let orig = params[i];
            params[i] = orig + eps;
            let up = loss(&params);
            params[i] = orig - eps;
            let down = loss(&params);
            params[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
        assert!(worst < 1e-4, "max relative gradient error {worst}");
    }
}
