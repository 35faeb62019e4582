//! Feature assembly: the 11-dimensional frame vector, sliding-window feature
//! maps, and train-set normalization.
//!
//! Frame vector layout, fixed:
//! `[delta, theta, alpha1, alpha2, beta1, beta2, gamma1, gamma2, gender_f, gender_m, age]`

use crate::dataset::ClassLabel;
use crate::error::{Error, Result};
use crate::signal::{BandPowers, BAND_COUNT};

/// Dimensionality of one frame's feature vector.
pub const FEATURE_DIM: usize = 11;

/// Default sliding-window width in frames (10 seconds at 2 frames/s).
pub const WINDOW_WIDTH: usize = 20;

/// Default window start stride in frames.
pub const WINDOW_STRIDE: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" => Ok(Gender::Female),
            "m" | "male" => Ok(Gender::Male),
            other => Err(Error::Data(format!("unknown gender value `{other}`"))),
        }
    }

    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Gender::Female => [1.0, 0.0],
            Gender::Male => [0.0, 1.0],
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Gender::Female => "f",
            Gender::Male => "m",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demographics {
    pub gender: Gender,
    pub age: f64,
}

impl Demographics {
    pub fn new(gender: Gender, age: f64) -> Result<Self> {
        if !(age.is_finite() && age > 0.0) {
            return Err(Error::Parameter(format!("age must be positive, got {age}")));
        }
        Ok(Self { gender, age })
    }
}

/// One frame's 11-dimensional feature vector plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    values: [f64; FEATURE_DIM],
    pub subject_id: String,
    pub frame_index: usize,
}

impl FrameFeatures {
    pub fn from_values(
        values: [f64; FEATURE_DIM],
        subject_id: impl Into<String>,
        frame_index: usize,
    ) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("frame features must be finite".into()));
        }
        Ok(Self { values, subject_id: subject_id.into(), frame_index })
    }

    pub fn values(&self) -> &[f64; FEATURE_DIM] {
        &self.values
    }

    pub fn band_slice(&self) -> &[f64] {
        &self.values[..BAND_COUNT]
    }
}

/// Concatenates band powers and demographics into the fixed 11-dim layout.
pub fn assemble(bands: &BandPowers, demo: &Demographics, subject_id: &str) -> FrameFeatures {
    let mut values = [0.0; FEATURE_DIM];
    values[..BAND_COUNT].copy_from_slice(&bands.values);
    let g = demo.gender.one_hot();
    values[8] = g[0];
    values[9] = g[1];
    values[10] = demo.age;
    FrameFeatures {
        values,
        subject_id: subject_id.to_string(),
        frame_index: bands.frame_index,
    }
}

/// A `width x 11` matrix of consecutive frames from one subject-session.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMap {
    rows: Vec<[f64; FEATURE_DIM]>,
    pub start_frame: usize,
}

impl WindowMap {
    pub fn new(rows: Vec<[f64; FEATURE_DIM]>, start_frame: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Parameter("window must have at least one row".into()));
        }
        Ok(Self { rows, start_frame })
    }

    pub fn width(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[[f64; FEATURE_DIM]] {
        &self.rows
    }

    /// Row-major flattening (time-major, then feature).
    pub fn flat(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

/// Enumerates sliding windows over one subject-session's ordered frames.
///
/// Start indices are `0, stride, 2*stride, ...` while `start + width <= n`;
/// fewer than `width` frames yields an empty vector.
pub fn windows(frames: &[FrameFeatures], width: usize, stride: usize) -> Result<Vec<WindowMap>> {
    if width == 0 || stride == 0 {
        return Err(Error::Parameter("window width and stride must be positive".into()));
    }
    let mut out = Vec::new();
    if frames.len() < width {
        return Ok(out);
    }
    let mut start = 0;
    while start + width <= frames.len() {
        let rows = frames[start..start + width].iter().map(|f| f.values).collect();
        out.push(WindowMap { rows, start_frame: start });
        start += stride;
    }
    Ok(out)
}

/// Number of windows [`windows`] emits for `n` frames.
pub fn window_count(n: usize, width: usize, stride: usize) -> usize {
    if n < width {
        0
    } else {
        (n - width) / stride + 1
    }
}

/// Majority label of a window's frames; ties break toward the lower class index.
pub fn window_label(labels: &[ClassLabel]) -> ClassLabel {
    let mut counts = [0usize; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    let mut best = 0;
    for c in 1..3 {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    ClassLabel::from_index(best).expect("index in range")
}

/// Per-dimension z-score parameters fitted on training rows only.
///
/// Dimensions with zero variance keep `std = 1` and are flagged so they pass
/// through normalization unscaled.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    mean: [f64; FEATURE_DIM],
    std: [f64; FEATURE_DIM],
    zero_variance: [bool; FEATURE_DIM],
}

impl NormalizationStats {
    /// Fits population mean/std over raw feature rows.
    pub fn fit(rows: &[[f64; FEATURE_DIM]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Parameter("cannot fit normalizer on empty training set".into()));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; FEATURE_DIM];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = [0.0; FEATURE_DIM];
        for row in rows {
            for d in 0..FEATURE_DIM {
                let diff = row[d] - mean[d];
                var[d] += diff * diff;
            }
        }
        let mut std = [0.0; FEATURE_DIM];
        let mut zero_variance = [false; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            var[d] /= n;
            if var[d] > 0.0 {
                std[d] = var[d].sqrt();
            } else {
                std[d] = 1.0;
                zero_variance[d] = true;
            }
        }
        Ok(Self { mean, std, zero_variance })
    }

    pub fn mean(&self) -> &[f64; FEATURE_DIM] {
        &self.mean
    }

    pub fn std(&self) -> &[f64; FEATURE_DIM] {
        &self.std
    }

    pub fn zero_variance(&self) -> &[bool; FEATURE_DIM] {
        &self.zero_variance
    }

    /// Reconstructs stats from stored fields (model file loading).
    pub fn from_parts(
        mean: [f64; FEATURE_DIM],
        std: [f64; FEATURE_DIM],
        zero_variance: [bool; FEATURE_DIM],
    ) -> Result<Self> {
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Format("normalization stats contain non-positive std".into()));
        }
        Ok(Self { mean, std, zero_variance })
    }

    pub fn normalize(&self, values: &[f64; FEATURE_DIM]) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            out[d] = (values[d] - self.mean[d]) / self.std[d];
        }
        out
    }

    pub fn denormalize(&self, values: &[f64; FEATURE_DIM]) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            out[d] = values[d] * self.std[d] + self.mean[d];
        }
        out
    }

    pub fn normalize_window(&self, window: &WindowMap) -> WindowMap {
        WindowMap {
            rows: window.rows.iter().map(|r| self.normalize(r)).collect(),
            start_frame: window.start_frame,
        }
    }
}

/// Fits [`NormalizationStats`] over training frames.
pub fn fit_normalizer(train: &[FrameFeatures]) -> Result<NormalizationStats> {
    let rows: Vec<[f64; FEATURE_DIM]> = train.iter().map(|f| f.values).collect();
    NormalizationStats::fit(&rows)
}
