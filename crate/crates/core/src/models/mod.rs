//! The five classifiers behind one trained-model abstraction.
//!
//! [`Classifier::train`] fits the requested kind on already-labeled data,
//! fitting z-score normalization on the training rows and applying it inside
//! every later prediction, so callers always pass raw feature values.

pub mod cnn;
pub mod gbt;
pub mod io;
pub mod mlp;
pub mod nn;
pub mod random;
pub mod svm;

use crate::dataset::{ClassLabel, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::features::{NormalizationStats, WindowMap, FEATURE_DIM, WINDOW_WIDTH};
use cnn::{CnnArch, CnnModel};
use gbt::{GbtModel, GbtParams, Node, Tree};
use io::{ByteReader, ByteWriter};
use mlp::MlpModel;
use nn::Adagrad;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use random::RandomModel;
use std::path::Path;
use svm::{BinarySvm, Decomposition, Kernel, SvmModel, SvmParams};

/// The five classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Svm,
    Dnn,
    Cnn,
    Xgb,
    Random,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Svm, ModelKind::Dnn, ModelKind::Cnn, ModelKind::Xgb, ModelKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Dnn => "dnn",
            ModelKind::Cnn => "cnn",
            ModelKind::Xgb => "xgb",
            ModelKind::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svm" => Ok(ModelKind::Svm),
            "dnn" | "mlp" => Ok(ModelKind::Dnn),
            "cnn" => Ok(ModelKind::Cnn),
            "xgb" | "gbt" => Ok(ModelKind::Xgb),
            "random" => Ok(ModelKind::Random),
            other => Err(Error::Parameter(format!(
                "unknown model kind `{other}` (expected svm, dnn, cnn, xgb, or random)"
            ))),
        }
    }

    fn tag(self) -> u8 {
        match self {
            ModelKind::Svm => 0,
            ModelKind::Dnn => 1,
            ModelKind::Cnn => 2,
            ModelKind::Xgb => 3,
            ModelKind::Random => 4,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ModelKind::Svm),
            1 => Ok(ModelKind::Dnn),
            2 => Ok(ModelKind::Cnn),
            3 => Ok(ModelKind::Xgb),
            4 => Ok(ModelKind::Random),
            other => Err(Error::Format(format!("unknown model kind tag {other}"))),
        }
    }

    /// Whether the kind consumes single frames or window maps.
    pub fn input_mode(self) -> InputMode {
        match self {
            ModelKind::Cnn => InputMode::Window,
            _ => InputMode::Frame,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    Frame,
    Window,
}

/// Per-kind training schedule. Gradient models read epochs/batch/rate;
/// boosted trees read epochs as rounds and the learning rate as shrinkage;
/// the SVM reads epochs as its sweep cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub early_stop_patience: Option<usize>,
}

impl TrainConfig {
    pub fn for_kind(kind: ModelKind) -> Self {
        let seed = 42;
        match kind {
            ModelKind::Dnn | ModelKind::Cnn => Self {
                seed,
                epochs: 50,
                batch_size: 32,
                learning_rate: 0.05,
                early_stop_patience: None,
            },
            ModelKind::Xgb => Self {
                seed,
                epochs: 100,
                batch_size: 1,
                learning_rate: 0.3,
                early_stop_patience: None,
            },
            ModelKind::Svm => Self {
                seed,
                epochs: 1000,
                batch_size: 1,
                learning_rate: 1.0,
                early_stop_patience: None,
            },
            ModelKind::Random => Self {
                seed,
                epochs: 1,
                batch_size: 1,
                learning_rate: 1.0,
                early_stop_patience: None,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Parameter("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.early_stop_patience == Some(0) {
            return Err(Error::Parameter("early-stop patience must be positive".into()));
        }
        Ok(())
    }
}

/// Labeled training data in the mode the classifier consumes.
pub enum TrainData<'a> {
    Frames(&'a [([f64; FEATURE_DIM], ClassLabel)]),
    Windows(&'a [(WindowMap, ClassLabel)]),
}

/// What training recorded: per-epoch (or per-round) loss and final accuracy
/// on the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub loss_curve: Vec<f64>,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Inner {
    Svm(SvmModel),
    Mlp(MlpModel),
    Cnn(CnnModel),
    Gbt(GbtModel),
    Random(RandomModel),
}

/// A trained classifier of any kind, carrying its normalization stats.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    kind: ModelKind,
    stats: NormalizationStats,
    inner: Inner,
    summary: Option<TrainSummary>,
}

const SHUFFLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn input_mode(&self) -> InputMode {
        self.kind.input_mode()
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.stats
    }

    pub fn summary(&self) -> Option<&TrainSummary> {
        self.summary.as_ref()
    }

    /// Window width this model expects; frame models report the default
    /// width so streaming warm-up stays comparable across kinds.
    pub fn window_width(&self) -> usize {
        match &self.inner {
            Inner::Cnn(m) => m.arch().input_h,
            _ => WINDOW_WIDTH,
        }
    }

    pub fn train(kind: ModelKind, data: &TrainData, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        match (kind.input_mode(), data) {
            (InputMode::Window, TrainData::Frames(_)) => {
                return Err(Error::Parameter(
                    "cnn consumes window maps: build 20x11 windows from the frames \
                     (enable windowing) before training"
                        .into(),
                ))
            }
            (InputMode::Frame, TrainData::Windows(_)) => {
                return Err(Error::Parameter(format!(
                    "{kind} consumes single frames, not window maps"
                )));
            }
            _ => {}
        }

        match data {
            TrainData::Frames(rows) => {
                if rows.is_empty() {
                    return Err(Error::Parameter("training set is empty".into()));
                }
                let raw: Vec<[f64; FEATURE_DIM]> = rows.iter().map(|(v, _)| *v).collect();
                let stats = NormalizationStats::fit(&raw)?;
                let inputs: Vec<Vec<f64>> =
                    raw.iter().map(|v| stats.normalize(v).to_vec()).collect();
                let labels: Vec<usize> = rows.iter().map(|(_, l)| l.index()).collect();
                let (inner, summary) = match kind {
                    ModelKind::Svm => train_svm(&inputs, &labels, config)?,
                    ModelKind::Dnn => train_mlp(&inputs, &labels, config)?,
                    ModelKind::Xgb => train_gbt(&inputs, &labels, config)?,
                    ModelKind::Random => train_random(&inputs, &labels, config)?,
                    ModelKind::Cnn => unreachable!("mode checked above"),
                };
                Ok(Self { kind, stats, inner, summary: Some(summary) })
            }
            TrainData::Windows(rows) => {
                if rows.is_empty() {
                    return Err(Error::Parameter("training set is empty".into()));
                }
                let width = rows[0].0.width();
                if rows.iter().any(|(w, _)| w.width() != width) {
                    return Err(Error::Parameter("training windows differ in width".into()));
                }
                let flat_rows: Vec<[f64; FEATURE_DIM]> =
                    rows.iter().flat_map(|(w, _)| w.rows().iter().copied()).collect();
                let stats = NormalizationStats::fit(&flat_rows)?;
                let inputs: Vec<Vec<f64>> =
                    rows.iter().map(|(w, _)| stats.normalize_window(w).flat()).collect();
                let labels: Vec<usize> = rows.iter().map(|(_, l)| l.index()).collect();
                let (inner, summary) = train_cnn(&inputs, &labels, width, config)?;
                Ok(Self { kind, stats, inner, summary: Some(summary) })
            }
        }
    }

    /// Classifies one raw 11-dim frame. Errors if this model consumes windows.
    pub fn predict_frame(&self, values: &[f64; FEATURE_DIM]) -> Result<(ClassLabel, [f64; 3])> {
        if self.input_mode() != InputMode::Frame {
            return Err(Error::Parameter(format!(
                "{} consumes window maps, not single frames",
                self.kind
            )));
        }
        let z = self.stats.normalize(values);
        let (label, scores) = match &self.inner {
            Inner::Svm(m) => m.predict(&z),
            Inner::Mlp(m) => {
                let (l, s) = m.predict(&z)?;
                (l, s)
            }
            Inner::Gbt(m) => m.predict(&z),
            Inner::Random(m) => m.predict(&z),
            Inner::Cnn(_) => unreachable!("mode checked above"),
        };
        Ok((ClassLabel::from_index(label)?, to_three(&scores)?))
    }

    /// Classifies one raw window map. Errors if this model consumes frames.
    pub fn predict_window(&self, window: &WindowMap) -> Result<(ClassLabel, [f64; 3])> {
        let Inner::Cnn(m) = &self.inner else {
            return Err(Error::Parameter(format!(
                "{} consumes single frames, not window maps",
                self.kind
            )));
        };
        if window.width() != m.arch().input_h {
            return Err(Error::Parameter(format!(
                "window has {} rows, model expects {}",
                window.width(),
                m.arch().input_h
            )));
        }
        let flat = self.stats.normalize_window(window).flat();
        let (label, scores) = m.predict(&flat)?;
        Ok((ClassLabel::from_index(label)?, to_three(&scores)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.put_bytes(io::MAGIC);
        w.put_u32(io::FORMAT_VERSION);
        w.put_u8(self.kind.tag());
        w.put_u8(match self.input_mode() {
            InputMode::Frame => 0,
            InputMode::Window => 1,
        });
        w.put_u32(FEATURE_DIM as u32);
        w.put_f64_slice(self.stats.mean());
        w.put_f64_slice(self.stats.std());
        for z in self.stats.zero_variance() {
            w.put_u8(*z as u8);
        }
        let payload = encode_inner(&self.inner);
        w.put_u64(payload.len() as u64);
        w.put_bytes(&payload);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = io::open_container(bytes)?;
        let kind = ModelKind::from_tag(r.get_u8()?)?;
        let mode_tag = r.get_u8()?;
        let dim = r.get_u32()? as usize;
        if dim != FEATURE_DIM {
            return Err(Error::Format(format!(
                "model was built for {dim}-dim features, this build uses {FEATURE_DIM}"
            )));
        }
        let mut mean = [0.0; FEATURE_DIM];
        let mut std = [0.0; FEATURE_DIM];
        let mut flags = [false; FEATURE_DIM];
        for m in mean.iter_mut() {
            *m = r.get_f64()?;
        }
        for s in std.iter_mut() {
            *s = r.get_f64()?;
        }
        for f in flags.iter_mut() {
            *f = r.get_u8()? != 0;
        }
        let stats = NormalizationStats::from_parts(mean, std, flags)?;
        let payload_len = r.get_u64()? as usize;
        let payload = r.take(payload_len)?;
        r.expect_end()?;
        let mut pr = ByteReader::new(payload);
        let inner = decode_inner(kind, &mut pr)?;
        pr.expect_end()?;
        let expected_mode = match kind.input_mode() {
            InputMode::Frame => 0,
            InputMode::Window => 1,
        };
        if mode_tag != expected_mode {
            return Err(Error::Format("input mode tag does not match model kind".into()));
        }
        Ok(Self { kind, stats, inner, summary: None })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

fn to_three(scores: &[f64]) -> Result<[f64; 3]> {
    if scores.len() != CLASS_COUNT {
        return Err(Error::Format(format!("expected 3 class scores, got {}", scores.len())));
    }
    Ok([scores[0], scores[1], scores[2]])
}

fn train_accuracy(predict: impl Fn(&[f64]) -> usize, inputs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let correct = inputs
        .iter()
        .zip(labels.iter())
        .filter(|(x, y)| predict(x) == **y)
        .count();
    correct as f64 / inputs.len() as f64
}

fn train_svm(
    inputs: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(Inner, TrainSummary)> {
    let params = SvmParams { max_passes: config.epochs, ..SvmParams::default() };
    let model = SvmModel::train(inputs, labels, CLASS_COUNT, &params)?;
    let acc = train_accuracy(|x| model.predict(x).0, inputs, labels);
    Ok((Inner::Svm(model), TrainSummary { loss_curve: Vec::new(), train_accuracy: acc }))
}

fn train_random(
    inputs: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(Inner, TrainSummary)> {
    let model = RandomModel::new(config.seed, CLASS_COUNT)?;
    let acc = train_accuracy(|x| model.predict(x).0, inputs, labels);
    Ok((Inner::Random(model), TrainSummary { loss_curve: Vec::new(), train_accuracy: acc }))
}

fn train_gbt(
    inputs: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(Inner, TrainSummary)> {
    let params = GbtParams {
        rounds: config.epochs,
        learning_rate: config.learning_rate,
        ..GbtParams::default()
    };
    let (model, curve) = GbtModel::train(inputs, labels, CLASS_COUNT, &params)?;
    let acc = train_accuracy(|x| model.predict(x).0, inputs, labels);
    Ok((Inner::Gbt(model), TrainSummary { loss_curve: curve, train_accuracy: acc }))
}

/// Backprop-trainable model, seen through its flat parameter vector.
trait GradientModel {
    fn backprop_batch(&self, batch: &[(Vec<f64>, usize)]) -> Result<(Vec<f64>, f64)>;
    fn flat_params_mut(&mut self) -> &mut [f64];
    fn flat_param_count(&self) -> usize;
}

impl GradientModel for MlpModel {
    fn backprop_batch(&self, batch: &[(Vec<f64>, usize)]) -> Result<(Vec<f64>, f64)> {
        self.backprop(batch)
    }
    fn flat_params_mut(&mut self) -> &mut [f64] {
        self.params_mut()
    }
    fn flat_param_count(&self) -> usize {
        self.param_count()
    }
}

impl GradientModel for CnnModel {
    fn backprop_batch(&self, batch: &[(Vec<f64>, usize)]) -> Result<(Vec<f64>, f64)> {
        self.backprop(batch)
    }
    fn flat_params_mut(&mut self) -> &mut [f64] {
        self.params_mut()
    }
    fn flat_param_count(&self) -> usize {
        self.param_count()
    }
}

/// Shared epoch loop: seeded shuffle, mini-batches, Adagrad updates,
/// divergence check, optional early stop on the epoch loss. Returns the
/// per-epoch loss curve.
fn gradient_training_loop<M: GradientModel>(
    model: &mut M,
    inputs: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let examples: Vec<(Vec<f64>, usize)> =
        inputs.iter().cloned().zip(labels.iter().copied()).collect();
    let mut opt = Adagrad::new(model.flat_param_count(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(SHUFFLE_SALT));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(Vec<f64>, usize)> =
                chunk.iter().map(|&i| examples[i].clone()).collect();
            let (grads, loss) = model.backprop_batch(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            opt.step(model.flat_params_mut(), &grads);
            total += loss;
            batches += 1;
        }
        let epoch_loss = total / batches as f64;
        curve.push(epoch_loss);
        if let Some(patience) = config.early_stop_patience {
            if epoch_loss + 1e-12 < best {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    Ok(curve)
}

fn train_mlp(
    inputs: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(Inner, TrainSummary)> {
    let dims = [FEATURE_DIM, 450, 450, CLASS_COUNT];
    let mut model = MlpModel::new(&dims, config.seed)?;
    let curve = gradient_training_loop(&mut model, inputs, labels, config)?;
    let acc = train_accuracy(|x| model.predict(x).map(|(l, _)| l).unwrap_or(0), inputs, labels);
    Ok((Inner::Mlp(model), TrainSummary { loss_curve: curve, train_accuracy: acc }))
}

fn train_cnn(
    inputs: &[Vec<f64>],
    labels: &[usize],
    width: usize,
    config: &TrainConfig,
) -> Result<(Inner, TrainSummary)> {
    let arch = CnnArch { input_h: width, input_w: FEATURE_DIM, ..CnnArch::default() };
    let mut model = CnnModel::new(arch, config.seed)?;
    let curve = gradient_training_loop(&mut model, inputs, labels, config)?;
    let acc = train_accuracy(|x| model.predict(x).map(|(l, _)| l).unwrap_or(0), inputs, labels);
    Ok((Inner::Cnn(model), TrainSummary { loss_curve: curve, train_accuracy: acc }))
}

fn encode_inner(inner: &Inner) -> Vec<u8> {
    let mut w = ByteWriter::new();
    match inner {
        Inner::Svm(m) => {
            w.put_u8(match m.decomposition {
                Decomposition::OneVsOne => 0,
                Decomposition::OneVsRest => 1,
            });
            w.put_u32(m.n_classes as u32);
            w.put_u32(m.machines.len() as u32);
            for (a, b, machine) in &m.machines {
                w.put_u32(*a as u32);
                w.put_u32(if *b == usize::MAX { u32::MAX } else { *b as u32 });
                match machine.kernel {
                    Kernel::Linear => w.put_u8(0),
                    Kernel::Rbf { gamma } => {
                        w.put_u8(1);
                        w.put_f64(gamma);
                    }
                }
                w.put_f64(machine.bias);
                let dim = machine.support_vectors.first().map_or(0, |v| v.len());
                w.put_u32(dim as u32);
                w.put_u32(machine.support_vectors.len() as u32);
                for (sv, coef) in machine.support_vectors.iter().zip(machine.coefficients.iter()) {
                    w.put_f64(*coef);
                    w.put_f64_slice(sv);
                }
            }
        }
        Inner::Mlp(m) => {
            w.put_u32(m.dims().len() as u32);
            for d in m.dims() {
                w.put_u32(*d as u32);
            }
            w.put_u64(m.params().len() as u64);
            w.put_f64_slice(m.params());
        }
        Inner::Cnn(m) => {
            let a = m.arch();
            for v in [
                a.input_h,
                a.input_w,
                a.conv1_filters,
                a.conv2_filters,
                a.kernel,
                a.pool,
                a.dense,
                a.classes,
            ] {
                w.put_u32(v as u32);
            }
            w.put_u64(m.params().len() as u64);
            w.put_f64_slice(m.params());
        }
        Inner::Gbt(m) => {
            w.put_u32(m.n_classes as u32);
            w.put_f64(m.params.learning_rate);
            w.put_f64(m.params.lambda);
            w.put_f64(m.params.gamma);
            w.put_u32(m.params.max_depth as u32);
            w.put_u32(m.trees.len() as u32);
            for round in &m.trees {
                for tree in round {
                    w.put_u32(tree.nodes.len() as u32);
                    for node in &tree.nodes {
                        match node {
                            Node::Leaf { value } => {
                                w.put_u8(0);
                                w.put_f64(*value);
                            }
                            Node::Split { feature, threshold, left, right } => {
                                w.put_u8(1);
                                w.put_u32(*feature as u32);
                                w.put_f64(*threshold);
                                w.put_u32(*left);
                                w.put_u32(*right);
                            }
                        }
                    }
                }
            }
        }
        Inner::Random(m) => {
            w.put_u64(m.seed);
            w.put_u32(m.n_classes as u32);
        }
    }
    w.into_bytes()
}

fn decode_inner(kind: ModelKind, r: &mut ByteReader) -> Result<Inner> {
    match kind {
        ModelKind::Svm => {
            let decomposition = match r.get_u8()? {
                0 => Decomposition::OneVsOne,
                1 => Decomposition::OneVsRest,
                other => {
                    return Err(Error::Format(format!("unknown decomposition tag {other}")))
                }
            };
            let n_classes = r.get_u32()? as usize;
            let n_machines = r.get_u32()? as usize;
            let mut machines = Vec::with_capacity(n_machines);
            for _ in 0..n_machines {
                let a = r.get_u32()? as usize;
                let b_raw = r.get_u32()?;
                let b = if b_raw == u32::MAX { usize::MAX } else { b_raw as usize };
                let kernel = match r.get_u8()? {
                    0 => Kernel::Linear,
                    1 => Kernel::Rbf { gamma: r.get_f64()? },
                    other => return Err(Error::Format(format!("unknown kernel tag {other}"))),
                };
                let bias = r.get_f64()?;
                let dim = r.get_u32()? as usize;
                let n_sv = r.get_u32()? as usize;
                let mut support_vectors = Vec::with_capacity(n_sv);
                let mut coefficients = Vec::with_capacity(n_sv);
                for _ in 0..n_sv {
                    coefficients.push(r.get_f64()?);
                    support_vectors.push(r.get_f64_vec(dim)?);
                }
                machines.push((a, b, BinarySvm { support_vectors, coefficients, bias, kernel }));
            }
            Ok(Inner::Svm(SvmModel { decomposition, n_classes, machines }))
        }
        ModelKind::Dnn => {
            let n_dims = r.get_u32()? as usize;
            let mut dims = Vec::with_capacity(n_dims);
            for _ in 0..n_dims {
                dims.push(r.get_u32()? as usize);
            }
            let n = r.get_u64()? as usize;
            let params = r.get_f64_vec(n)?;
            Ok(Inner::Mlp(MlpModel::from_parts(dims, params)?))
        }
        ModelKind::Cnn => {
            let mut vals = [0usize; 8];
            for v in vals.iter_mut() {
                *v = r.get_u32()? as usize;
            }
            let arch = CnnArch {
                input_h: vals[0],
                input_w: vals[1],
                conv1_filters: vals[2],
                conv2_filters: vals[3],
                kernel: vals[4],
                pool: vals[5],
                dense: vals[6],
                classes: vals[7],
            };
            let n = r.get_u64()? as usize;
            let params = r.get_f64_vec(n)?;
            Ok(Inner::Cnn(CnnModel::from_parts(arch, params)?))
        }
        ModelKind::Xgb => {
            let n_classes = r.get_u32()? as usize;
            let learning_rate = r.get_f64()?;
            let lambda = r.get_f64()?;
            let gamma = r.get_f64()?;
            let max_depth = r.get_u32()? as usize;
            let rounds = r.get_u32()? as usize;
            let mut trees = Vec::with_capacity(rounds);
            for _ in 0..rounds {
                let mut round = Vec::with_capacity(n_classes);
                for _ in 0..n_classes {
                    let n_nodes = r.get_u32()? as usize;
                    let mut nodes = Vec::with_capacity(n_nodes);
                    for _ in 0..n_nodes {
                        match r.get_u8()? {
                            0 => nodes.push(Node::Leaf { value: r.get_f64()? }),
                            1 => nodes.push(Node::Split {
                                feature: r.get_u32()? as usize,
                                threshold: r.get_f64()?,
                                left: r.get_u32()?,
                                right: r.get_u32()?,
                            }),
                            other => {
                                return Err(Error::Format(format!("unknown node tag {other}")))
                            }
                        }
                    }
                    round.push(Tree { nodes });
                }
                trees.push(round);
            }
            let params = GbtParams { rounds, max_depth, learning_rate, lambda, gamma };
            Ok(Inner::Gbt(GbtModel { n_classes, params, trees }))
        }
        ModelKind::Random => {
            let seed = r.get_u64()?;
            let n_classes = r.get_u32()? as usize;
            Ok(Inner::Random(RandomModel::new(seed, n_classes)?))
        }
    }
}
