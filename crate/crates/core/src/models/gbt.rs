//! Gradient-boosted regression trees with a softmax multiclass objective.
//!
//! Per boosting round, one regression tree per class is fit to the loss
//! gradients/hessians of the current margins. Trees use exact greedy splits:
//! best gain over all (feature, midpoint threshold) candidates, where
//! `gain = 1/2 (GL²/(HL+λ) + GR²/(HR+λ) - G²/(H+λ)) - γ` and a leaf's value
//! is `-G/(H+λ)`. Candidates are scanned feature-ascending, threshold-
//! ascending; a node splits only when the best gain is strictly positive.

use super::nn::{argmax_tie_low, softmax};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { rounds: 100, max_depth: 6, learning_rate: 0.3, lambda: 1.0, gamma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
    Leaf { value: f64 },
}

/// One regression tree stored as a flat node arena rooted at index 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    idx = if row[*feature] < *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn half_score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Best split of a set of rows, if any has positive gain.
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn find_best_split(
    rows: &[usize],
    features: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    lambda: f64,
    gamma: f64,
) -> Option<BestSplit> {
    let dim = features[rows[0]].len();
    let g_total: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h_total: f64 = rows.iter().map(|&i| hess[i]).sum();
    let parent = half_score(g_total, h_total, lambda);

    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for feature in 0..dim {
        order.sort_by(|&a, &b| features[a][feature].total_cmp(&features[b][feature]));
        let mut g_left = 0.0;
        let mut h_left = 0.0;
        for w in 0..order.len() - 1 {
            g_left += grad[order[w]];
            h_left += hess[order[w]];
            let lo = features[order[w]][feature];
            let hi = features[order[w + 1]][feature];
            if lo == hi {
                continue;
            }
            let gain = 0.5
                * (half_score(g_left, h_left, lambda)
                    + half_score(g_total - g_left, h_total - h_left, lambda)
                    - parent)
                - gamma;
            if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                // adjacent floats can round the midpoint down to lo; the
                // partition predicate is `value < threshold`, so keep lo left
                let mut threshold = (lo + hi) / 2.0;
                if threshold <= lo {
                    threshold = hi;
                }
                best = Some(BestSplit { feature, threshold, gain });
            }
        }
    }
    best
}

/// Fits one regression tree to per-row gradient/hessian pairs by greedy
/// best-gain splitting. Rows with identical features (or no positive gain
/// anywhere) collapse to a single leaf.
pub fn fit_tree(
    grad: &[f64],
    hess: &[f64],
    features: &[Vec<f64>],
    max_depth: usize,
    lambda: f64,
    gamma: f64,
) -> Result<Tree> {
    if grad.len() != hess.len() || grad.len() != features.len() || grad.is_empty() {
        return Err(Error::Parameter(
            "fit_tree needs one gradient/hessian pair per feature row".into(),
        ));
    }
    let mut tree = Tree::default();
    let rows: Vec<usize> = (0..grad.len()).collect();
    build_node(&mut tree, &rows, features, grad, hess, max_depth, lambda, gamma);
    Ok(tree)
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    tree: &mut Tree,
    rows: &[usize],
    features: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    depth_left: usize,
    lambda: f64,
    gamma: f64,
) -> u32 {
    let g: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h: f64 = rows.iter().map(|&i| hess[i]).sum();

    let split = if depth_left == 0 || rows.len() < 2 {
        None
    } else {
        find_best_split(rows, features, grad, hess, lambda, gamma)
    };

    match split {
        None => {
            tree.nodes.push(Node::Leaf { value: leaf_value(g, h, lambda) });
            (tree.nodes.len() - 1) as u32
        }
        Some(best) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| features[i][best.feature] < best.threshold);
            let idx = tree.nodes.len();
            tree.nodes.push(Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left: 0,
                right: 0,
            });
            let left =
                build_node(tree, &left_rows, features, grad, hess, depth_left - 1, lambda, gamma);
            let right =
                build_node(tree, &right_rows, features, grad, hess, depth_left - 1, lambda, gamma);
            if let Node::Split { left: l, right: r, .. } = &mut tree.nodes[idx] {
                *l = left;
                *r = right;
            }
            idx as u32
        }
    }
}

/// The boosted multiclass model: `trees[round][class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub n_classes: usize,
    pub params: GbtParams,
    pub trees: Vec<Vec<Tree>>,
}

impl GbtModel {
    /// Trains with the softmax objective: per round and class,
    /// `g_i = p_i - 1{y_i = c}` and `h_i = p_i (1 - p_i)`.
    /// Returns the model and the per-round training log-loss curve.
    pub fn train(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        params: &GbtParams,
    ) -> Result<(Self, Vec<f64>)> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::Parameter("GBT needs matching non-empty inputs".into()));
        }
        if labels.iter().any(|l| *l >= n_classes) {
            return Err(Error::Parameter("label out of class range".into()));
        }
        let n = rows.len();
        let mut margins = vec![vec![0.0; n_classes]; n];
        let mut trees = Vec::with_capacity(params.rounds);
        let mut curve = Vec::with_capacity(params.rounds);

        for _ in 0..params.rounds {
            let probs: Vec<Vec<f64>> = margins.iter().map(|m| softmax(m)).collect();
            let mut round = Vec::with_capacity(n_classes);
            for class in 0..n_classes {
                let grad: Vec<f64> = (0..n)
                    .map(|i| probs[i][class] - if labels[i] == class { 1.0 } else { 0.0 })
                    .collect();
                let hess: Vec<f64> = (0..n)
                    .map(|i| (probs[i][class] * (1.0 - probs[i][class])).max(1e-16))
                    .collect();
                let tree =
                    fit_tree(&grad, &hess, rows, params.max_depth, params.lambda, params.gamma)?;
                for (i, row) in rows.iter().enumerate() {
                    margins[i][class] += params.learning_rate * tree.evaluate(row);
                }
                round.push(tree);
            }
            trees.push(round);
            let loss: f64 = (0..n)
                .map(|i| -softmax(&margins[i])[labels[i]].max(1e-300).ln())
                .sum::<f64>()
                / n as f64;
            curve.push(loss);
        }
        Ok((Self { n_classes, params: *params, trees }, curve))
    }

    pub fn margins(&self, row: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.n_classes];
        for round in &self.trees {
            for (class, tree) in round.iter().enumerate() {
                m[class] += self.params.learning_rate * tree.evaluate(row);
            }
        }
        m
    }

    /// Softmax probabilities over boosted margins.
    pub fn predict(&self, row: &[f64]) -> (usize, Vec<f64>) {
        let probs = softmax(&self.margins(row));
        (argmax_tie_low(&probs), probs)
    }
}
