//! Python bindings: the signal pipeline, classifier training/prediction,
//! the evaluation formulas, and streaming sessions.

use mindstate::dataset::ClassLabel;
use mindstate::error::Error;
use mindstate::features::{WindowMap, FEATURE_DIM};
use mindstate::models::{Classifier, InputMode, ModelKind, TrainConfig, TrainData};
use mindstate::signal::{BandTable, FrameWindow, RawSegment};
use mindstate::stream::StreamSession;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(_) => PyIOError::new_err(err.to_string()),
        Error::Diverged { .. } => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn frame_array(values: &[f64]) -> PyResult<[f64; FEATURE_DIM]> {
    values.try_into().map_err(|_| {
        PyValueError::new_err(format!("frame has {} values, expected {FEATURE_DIM}", values.len()))
    })
}

fn window_map(rows: &[Vec<f64>]) -> PyResult<WindowMap> {
    let rows: Vec<[f64; FEATURE_DIM]> =
        rows.iter().map(|r| frame_array(r)).collect::<PyResult<_>>()?;
    WindowMap::new(rows, 0).map_err(to_py)
}

/// First-order high-pass (DC removal) over a voltage trace.
#[pyfunction]
fn high_pass(samples: Vec<f64>, sample_rate: u32, cutoff_hz: f64) -> PyResult<Vec<f64>> {
    let seg = RawSegment::new(samples, sample_rate, "py").map_err(to_py)?;
    Ok(mindstate::signal::high_pass(&seg, cutoff_hz).map_err(to_py)?.samples().to_vec())
}

/// 8 band powers per non-overlapping 0.5 s frame (rectangular taper,
/// default band table, or one parsed from `band_table` config text).
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, band_table=None))]
fn frame_band_powers(
    samples: Vec<f64>,
    sample_rate: u32,
    band_table: Option<&str>,
) -> PyResult<Vec<Vec<f64>>> {
    let table = match band_table {
        Some(text) => BandTable::from_config_str(text).map_err(to_py)?,
        None => BandTable::default(),
    };
    let seg = RawSegment::new(samples, sample_rate, "py").map_err(to_py)?;
    let frames =
        mindstate::signal::frame_band_powers_with(&seg, &table, FrameWindow::Rectangular)
            .map_err(to_py)?;
    Ok(frames.into_iter().map(|f| f.values.to_vec()).collect())
}

/// Default band bounds in the plain-text config format.
#[pyfunction]
fn default_band_table() -> String {
    BandTable::default().to_config_string()
}

/// 95% confidence-interval halfwidth for a classification accuracy.
#[pyfunction]
fn confidence_interval(accuracy: f64, n: usize) -> PyResult<f64> {
    mindstate::eval::confidence_interval(accuracy, n).map_err(to_py)
}

/// Accuracy per second of evaluation time.
#[pyfunction]
fn potential(accuracy: f64, eval_seconds: f64) -> f64 {
    mindstate::eval::potential(accuracy, eval_seconds)
}

/// A trained classifier (svm, dnn, cnn, xgb, or random).
#[pyclass]
struct Model {
    inner: Classifier,
}

#[pymethods]
impl Model {
    /// Trains a frame-input kind on 11-dim rows with labels 0/1/2.
    #[staticmethod]
    #[pyo3(signature = (kind, rows, labels, seed=42, epochs=None, learning_rate=None))]
    fn train(
        kind: &str,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        seed: u64,
        epochs: Option<usize>,
        learning_rate: Option<f64>,
    ) -> PyResult<Self> {
        let kind = ModelKind::parse(kind).map_err(to_py)?;
        if rows.len() != labels.len() {
            return Err(PyValueError::new_err("rows and labels differ in length"));
        }
        let data: Vec<([f64; FEATURE_DIM], ClassLabel)> = rows
            .iter()
            .zip(labels.iter())
            .map(|(r, l)| Ok((frame_array(r)?, ClassLabel::from_index(*l).map_err(to_py)?)))
            .collect::<PyResult<_>>()?;
        let mut config = TrainConfig { seed, ..TrainConfig::for_kind(kind) };
        if let Some(e) = epochs {
            config.epochs = e;
        }
        if let Some(lr) = learning_rate {
            config.learning_rate = lr;
        }
        let inner =
            Classifier::train(kind, &TrainData::Frames(&data), &config).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Trains the window-input kind (cnn) on `width x 11` windows.
    #[staticmethod]
    #[pyo3(signature = (windows, labels, seed=42, epochs=None, learning_rate=None))]
    fn train_cnn(
        windows: Vec<Vec<Vec<f64>>>,
        labels: Vec<usize>,
        seed: u64,
        epochs: Option<usize>,
        learning_rate: Option<f64>,
    ) -> PyResult<Self> {
        if windows.len() != labels.len() {
            return Err(PyValueError::new_err("windows and labels differ in length"));
        }
        let data: Vec<(WindowMap, ClassLabel)> = windows
            .iter()
            .zip(labels.iter())
            .map(|(w, l)| Ok((window_map(w)?, ClassLabel::from_index(*l).map_err(to_py)?)))
            .collect::<PyResult<_>>()?;
        let mut config = TrainConfig { seed, ..TrainConfig::for_kind(ModelKind::Cnn) };
        if let Some(e) = epochs {
            config.epochs = e;
        }
        if let Some(lr) = learning_rate {
            config.learning_rate = lr;
        }
        let inner = Classifier::train(ModelKind::Cnn, &TrainData::Windows(&data), &config)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Classifies one raw 11-dim frame: `(label_index, label_name, scores)`.
    fn predict(&self, row: Vec<f64>) -> PyResult<(usize, String, Vec<f64>)> {
        let (label, scores) =
            self.inner.predict_frame(&frame_array(&row)?).map_err(to_py)?;
        Ok((label.index(), label.name().to_string(), scores.to_vec()))
    }

    /// Classifies one `width x 11` window: `(label_index, label_name, scores)`.
    fn predict_window(&self, rows: Vec<Vec<f64>>) -> PyResult<(usize, String, Vec<f64>)> {
        let (label, scores) =
            self.inner.predict_window(&window_map(&rows)?).map_err(to_py)?;
        Ok((label.index(), label.name().to_string(), scores.to_vec()))
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().name().to_string()
    }

    #[getter]
    fn input_mode(&self) -> &'static str {
        match self.inner.input_mode() {
            InputMode::Frame => "frame",
            InputMode::Window => "window",
        }
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(std::path::Path::new(path)).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: Classifier::load(std::path::Path::new(path)).map_err(to_py)? })
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.inner.to_bytes()
    }
}

/// A live classification stream: feed frames, get decisions once the
/// 20-frame window is warm.
#[pyclass]
struct Stream {
    inner: StreamSession<Classifier>,
}

#[pymethods]
impl Stream {
    #[new]
    #[pyo3(signature = (model, emit_stride=1))]
    fn new(model: &Model, emit_stride: usize) -> PyResult<Self> {
        Ok(Self {
            inner: StreamSession::with_emit_stride(model.inner.clone(), emit_stride)
                .map_err(to_py)?,
        })
    }

    /// Pushes one frame. Returns `None` during warm-up, else
    /// `(frame_index, label_name, scores, latency_seconds)`.
    fn push(&mut self, frame: Vec<f64>) -> PyResult<Option<(usize, String, Vec<f64>, f64)>> {
        let decision = self.inner.push_slice(&frame).map_err(to_py)?;
        Ok(decision.map(|d| {
            (d.frame_index, d.label.name().to_string(), d.scores.to_vec(), d.inference_latency)
        }))
    }

    #[getter]
    fn frames_seen(&self) -> usize {
        self.inner.frames_seen()
    }
}

#[pymodule]
fn mindstate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(high_pass, m)?)?;
    m.add_function(wrap_pyfunction!(frame_band_powers, m)?)?;
    m.add_function(wrap_pyfunction!(default_band_table, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_class::<Model>()?;
    m.add_class::<Stream>()?;
    Ok(())
}
