//! Soft-margin support vector machines trained by sequential minimal
//! optimization, with one-vs-one (default) or one-vs-rest decomposition for
//! the 3-class problem.
//!
//! The binary trainer solves the dual
//! `max Σa_i - 1/2 ΣΣ a_i a_j y_i y_j K(x_i, x_j)` subject to
//! `0 <= a_i <= C` and `Σ a_i y_i = 0`, by pairwise coordinate ascent with an
//! error cache. All heuristics are deterministic (first violator scan,
//! largest |E1 - E2| second choice, lowest index on ties).

use super::nn::argmax_tie_low;
use crate::error::{Error, Result};

/// Kernel function over feature vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b.iter()).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Requested kernel; `RbfScale` resolves `gamma = 1 / (d * var(X))` on the
/// training data, matching the common library default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    Linear,
    RbfScale,
    Rbf { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decomposition {
    OneVsOne,
    OneVsRest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelChoice,
    pub tol: f64,
    pub decomposition: Decomposition,
    /// Safety cap on full examine-all sweeps.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 0.5,
            kernel: KernelChoice::RbfScale,
            tol: 1e-3,
            decomposition: Decomposition::OneVsOne,
            max_passes: 1000,
        }
    }
}

/// One trained binary subproblem: support vectors with `coef = alpha * y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub kernel: Kernel,
}

impl BinarySvm {
    /// Decision value `f(x) = sum coef_i K(sv_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(self.coefficients.iter())
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    /// Weight vector `w = sum coef_i x_i`; meaningful for the linear kernel.
    pub fn weight_vector(&self, dim: usize) -> Vec<f64> {
        let mut w = vec![0.0; dim];
        for (sv, c) in self.support_vectors.iter().zip(self.coefficients.iter()) {
            for (wi, xi) in w.iter_mut().zip(sv.iter()) {
                *wi += c * xi;
            }
        }
        w
    }
}

/// Outcome of SMO on one binary problem, with full alphas for diagnostics.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
}

/// Trains one binary subproblem with SMO. `labels` must be +1/-1.
pub fn train_binary(
    x: &[Vec<f64>],
    labels: &[f64],
    kernel: Kernel,
    c: f64,
    tol: f64,
    max_passes: usize,
) -> Result<(BinarySvm, SmoSolution)> {
    if x.is_empty() || x.len() != labels.len() {
        return Err(Error::Parameter("binary SVM needs matching non-empty inputs".into()));
    }
    if labels.iter().any(|y| *y != 1.0 && *y != -1.0) {
        return Err(Error::Parameter("binary labels must be +1 or -1".into()));
    }
    if c.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Parameter(format!("C must be positive, got {c}")));
    }
    let mut smo = Smo {
        x,
        y: labels,
        kernel,
        c,
        tol,
        alphas: vec![0.0; x.len()],
        bias: 0.0,
        errors: labels.iter().map(|y| -y).collect(), // f = 0 initially
    };
    smo.solve(max_passes);

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..x.len() {
        if smo.alphas[i] > 0.0 {
            support_vectors.push(x[i].clone());
            coefficients.push(smo.alphas[i] * labels[i]);
        }
    }
    Ok((
        BinarySvm { support_vectors, coefficients, bias: smo.bias, kernel },
        SmoSolution { alphas: smo.alphas, bias: smo.bias },
    ))
}

struct Smo<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    kernel: Kernel,
    c: f64,
    tol: f64,
    alphas: Vec<f64>,
    bias: f64,
    errors: Vec<f64>,
}

impl Smo<'_> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.kernel.eval(&self.x[i], &self.x[j])
    }

    fn solve(&mut self, max_passes: usize) {
        let n = self.x.len();
        let mut examine_all = true;
        let mut passes = 0;
        loop {
            let mut changed = 0;
            if examine_all {
                for i in 0..n {
                    changed += self.examine(i) as usize;
                }
                passes += 1;
            } else {
                for i in 0..n {
                    if self.alphas[i] > 0.0 && self.alphas[i] < self.c {
                        changed += self.examine(i) as usize;
                    }
                }
            }
            if examine_all {
                if changed == 0 || passes >= max_passes {
                    break;
                }
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.y[i2];
        let a2 = self.alphas[i2];
        let e2 = self.errors[i2];
        let r2 = e2 * y2;
        let violates = (r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0);
        if !violates {
            return false;
        }

        // second-choice heuristic: largest |E1 - E2| over non-bound points
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.x.len() {
            if i == i2 || self.alphas[i] <= 0.0 || self.alphas[i] >= self.c {
                continue;
            }
            let gap = (self.errors[i] - e2).abs();
            if best.map_or(true, |(_, g)| gap > g) {
                best = Some((i, gap));
            }
        }
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // fall back: non-bound points in index order, then all points
        for i1 in 0..self.x.len() {
            if i1 != i2 && self.alphas[i1] > 0.0 && self.alphas[i1] < self.c && self.take_step(i1, i2)
            {
                return true;
            }
        }
        for i1 in 0..self.x.len() {
            if i1 != i2 && self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (a1_old, a2_old) = (self.alphas[i1], self.alphas[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;

        let (low, high) = if s < 0.0 {
            (f64::max(0.0, a2_old - a1_old), f64::min(self.c, self.c + a2_old - a1_old))
        } else {
            (f64::max(0.0, a1_old + a2_old - self.c), f64::min(self.c, a1_old + a2_old))
        };
        if low >= high {
            return false;
        }

        let k11 = self.k(i1, i1);
        let k12 = self.k(i1, i2);
        let k22 = self.k(i2, i2);
        let eta = k11 + k22 - 2.0 * k12;
        if eta <= 1e-12 {
            // duplicate points: no curvature along this pair
            return false;
        }
        let mut a2 = a2_old + y2 * (e1 - e2) / eta;
        a2 = a2.clamp(low, high);
        // snap to the box edges: rounding in the L/H arithmetic can strand an
        // alpha one ulp inside a bound, where it reads as interior but no
        // step large enough to matter is feasible
        let snap = 1e-8;
        if a2 < snap {
            a2 = 0.0;
        } else if a2 > self.c - snap {
            a2 = self.c;
        }
        if (a2 - a2_old).abs() < 1e-12 * (a2 + a2_old + 1e-12) {
            return false;
        }
        let mut a1 = a1_old + s * (a2_old - a2);
        if a1 < snap {
            a1 = 0.0;
        } else if a1 > self.c - snap {
            a1 = self.c;
        }
        let a1 = a1.clamp(0.0, self.c);

        let d1 = y1 * (a1 - a1_old);
        let d2 = y2 * (a2 - a2_old);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_bias = if a1 > 0.0 && a1 < self.c {
            b1
        } else if a2 > 0.0 && a2 < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let delta_b = new_bias - self.bias;

        self.alphas[i1] = a1;
        self.alphas[i2] = a2;
        self.bias = new_bias;
        for i in 0..self.x.len() {
            self.errors[i] += d1 * self.k(i1, i) + d2 * self.k(i2, i) + delta_b;
        }
        true
    }
}

/// Multiclass SVM over 3 classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub decomposition: Decomposition,
    pub n_classes: usize,
    /// One-vs-one: `(class_a, class_b, machine)` where the machine's +1 side
    /// is `class_a`. One-vs-rest: `(class, usize::MAX, machine)`.
    pub machines: Vec<(usize, usize, BinarySvm)>,
}

/// Resolves `RbfScale` against the training matrix: `1 / (d * var)` over all
/// entries, falling back to `1/d` for constant data.
pub fn resolve_kernel(choice: KernelChoice, rows: &[Vec<f64>]) -> Kernel {
    match choice {
        KernelChoice::Linear => Kernel::Linear,
        KernelChoice::Rbf { gamma } => Kernel::Rbf { gamma },
        KernelChoice::RbfScale => {
            let d = rows.first().map_or(1, |r| r.len()).max(1);
            let n = (rows.len() * d) as f64;
            let mean: f64 = rows.iter().flatten().sum::<f64>() / n;
            let var: f64 =
                rows.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let gamma = if var > 0.0 { 1.0 / (d as f64 * var) } else { 1.0 / d as f64 };
            Kernel::Rbf { gamma }
        }
    }
}

impl SvmModel {
    pub fn train(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        params: &SvmParams,
    ) -> Result<Self> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::Parameter("SVM needs matching non-empty inputs".into()));
        }
        if labels.iter().any(|l| *l >= n_classes) {
            return Err(Error::Parameter("label out of class range".into()));
        }
        let kernel = resolve_kernel(params.kernel, rows);
        let mut machines = Vec::new();
        match params.decomposition {
            Decomposition::OneVsOne => {
                for a in 0..n_classes {
                    for b in a + 1..n_classes {
                        let mut x = Vec::new();
                        let mut y = Vec::new();
                        for (row, lab) in rows.iter().zip(labels.iter()) {
                            if *lab == a {
                                x.push(row.clone());
                                y.push(1.0);
                            } else if *lab == b {
                                x.push(row.clone());
                                y.push(-1.0);
                            }
                        }
                        // skip pairs where either class is absent: no margin to fit
                        if !y.contains(&1.0) || !y.contains(&-1.0) {
                            continue;
                        }
                        let (machine, _) =
                            train_binary(&x, &y, kernel, params.c, params.tol, params.max_passes)?;
                        machines.push((a, b, machine));
                    }
                }
            }
            Decomposition::OneVsRest => {
                for a in 0..n_classes {
                    let y: Vec<f64> =
                        labels.iter().map(|l| if *l == a { 1.0 } else { -1.0 }).collect();
                    if !y.contains(&1.0) || !y.contains(&-1.0) {
                        continue;
                    }
                    let (machine, _) =
                        train_binary(rows, &y, kernel, params.c, params.tol, params.max_passes)?;
                    machines.push((a, usize::MAX, machine));
                }
            }
        }
        Ok(Self { decomposition: params.decomposition, n_classes, machines })
    }

    /// Class scores: vote counts for one-vs-one, decision values for
    /// one-vs-rest. The label is the argmax with lowest-index tie-break.
    pub fn predict(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let mut scores = vec![0.0; self.n_classes];
        match self.decomposition {
            Decomposition::OneVsOne => {
                for (a, b, machine) in &self.machines {
                    if machine.decision(x) >= 0.0 {
                        scores[*a] += 1.0;
                    } else {
                        scores[*b] += 1.0;
                    }
                }
            }
            Decomposition::OneVsRest => {
                for (a, _, machine) in &self.machines {
                    scores[*a] = machine.decision(x);
                }
            }
        }
        (argmax_tie_low(&scores), scores)
    }
}

/// Largest KKT violation over the training set for a finished binary
/// problem; the margin/complementarity residual the optimizer drives under
/// its tolerance.
pub fn kkt_residual(
    x: &[Vec<f64>],
    labels: &[f64],
    solution: &SmoSolution,
    kernel: Kernel,
    c: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let f: f64 = x
            .iter()
            .zip(labels.iter())
            .zip(solution.alphas.iter())
            .map(|((xj, yj), aj)| aj * yj * kernel.eval(xj, &x[i]))
            .sum::<f64>()
            + solution.bias;
        let margin = labels[i] * f;
        let a = solution.alphas[i];
        let violation = if a <= 0.0 {
            (1.0 - margin).max(0.0) // must be >= 1
        } else if a >= c {
            (margin - 1.0).max(0.0) // must be <= 1
        } else {
            (margin - 1.0).abs() // must be == 1
        };
        worst = worst.max(violation);
    }
    worst
}
