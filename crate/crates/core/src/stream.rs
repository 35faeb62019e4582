//! Real-time classification loop: frames arrive one at a time (2 Hz in
//! deployment), a ring buffer holds the last window of features, and a
//! decision is emitted once the window is full.
//!
//! Session state is O(window) regardless of stream length, and a session's
//! decisions arrive in frame order.

use crate::dataset::ClassLabel;
use crate::error::{Error, Result};
use crate::features::{WindowMap, FEATURE_DIM};
use crate::models::{Classifier, InputMode};
use serde::Serialize;
use std::borrow::Borrow;
use std::collections::VecDeque;
use std::time::Instant;

/// One emitted classification.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDecision {
    pub label: ClassLabel,
    pub scores: [f64; 3],
    /// Index of the newest frame covered by this decision (0-based).
    pub frame_index: usize,
    /// Wall-clock seconds spent inside the model for this decision.
    pub inference_latency: f64,
}

/// Json-lines rendering of one decision (`frame,label,scores,latency_s`).
#[derive(Serialize)]
struct DecisionLine<'a> {
    frame: usize,
    label: &'a str,
    scores: [f64; 3],
    latency_s: f64,
}

impl StateDecision {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&DecisionLine {
            frame: self.frame_index,
            label: self.label.name(),
            scores: self.scores,
            latency_s: self.inference_latency,
        })
        .expect("decision serialization cannot fail")
    }
}

/// A live classification stream over one model. Generic over model
/// ownership: sessions can borrow a shared model or own one outright.
pub struct StreamSession<M: Borrow<Classifier>> {
    model: M,
    buffer: VecDeque<[f64; FEATURE_DIM]>,
    width: usize,
    frames_seen: usize,
    emit_stride: usize,
}

impl<M: Borrow<Classifier>> StreamSession<M> {
    pub fn new(model: M) -> Self {
        Self::with_emit_stride(model, 1).expect("stride 1 is valid")
    }

    /// `emit_stride` spaces decisions: after warm-up, one decision every
    /// `emit_stride` frames.
    pub fn with_emit_stride(model: M, emit_stride: usize) -> Result<Self> {
        if emit_stride == 0 {
            return Err(Error::Parameter("emit stride must be positive".into()));
        }
        let width = model.borrow().window_width();
        Ok(Self {
            model,
            width,
            buffer: VecDeque::with_capacity(width),
            frames_seen: 0,
            emit_stride,
        })
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Feeds one frame; emits a decision once the buffer is full and the
    /// stride lines up. Frame-input models classify the newest frame,
    /// window-input models the buffered window.
    pub fn push_frame(&mut self, values: &[f64; FEATURE_DIM]) -> Result<Option<StateDecision>> {
        if self.buffer.len() == self.width {
            self.buffer.pop_front();
        }
        self.buffer.push_back(*values);
        self.frames_seen += 1;

        if self.buffer.len() < self.width
            || (self.frames_seen - self.width) % self.emit_stride != 0
        {
            return Ok(None);
        }

        let start = Instant::now();
        let model = self.model.borrow();
        let (label, scores) = match model.input_mode() {
            InputMode::Frame => model.predict_frame(values)?,
            InputMode::Window => {
                let rows: Vec<[f64; FEATURE_DIM]> = self.buffer.iter().copied().collect();
                let window = WindowMap::new(rows, self.frames_seen - self.width)?;
                model.predict_window(&window)?
            }
        };
        let inference_latency = start.elapsed().as_secs_f64().max(1e-9);
        Ok(Some(StateDecision {
            label,
            scores,
            frame_index: self.frames_seen - 1,
            inference_latency,
        }))
    }

    /// Length-checked variant for untyped inputs.
    pub fn push_slice(&mut self, values: &[f64]) -> Result<Option<StateDecision>> {
        let arr: [f64; FEATURE_DIM] = values.try_into().map_err(|_| {
            Error::Parameter(format!(
                "frame has {} values, expected {FEATURE_DIM}",
                values.len()
            ))
        })?;
        self.push_frame(&arr)
    }
}

/// Replays recorded frames through a session, optionally throttled to
/// `rate` frames per second of wall-clock time (2.0 matches live capture).
pub fn replay<M: Borrow<Classifier>>(
    session: &mut StreamSession<M>,
    rows: &[[f64; FEATURE_DIM]],
    rate: Option<f64>,
) -> Result<Vec<StateDecision>> {
    if let Some(r) = rate {
        if r.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Parameter(format!("replay rate must be positive, got {r}")));
        }
    }
    let period = rate.map(|r| std::time::Duration::from_secs_f64(1.0 / r));
    let mut decisions = Vec::new();
    let start = Instant::now();
    for (i, row) in rows.iter().enumerate() {
        if let Some(period) = period {
            let due = period * i as u32;
            let elapsed = start.elapsed();
            if due > elapsed {
                std::thread::sleep(due - elapsed);
            }
        }
        if let Some(d) = session.push_frame(row)? {
            decisions.push(d);
        }
    }
    Ok(decisions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ClassLabel;
    use crate::models::{Classifier, ModelKind, TrainConfig, TrainData};

    fn frame_model() -> Classifier {
        let rows: Vec<([f64; FEATURE_DIM], ClassLabel)> = (0..30)
            .map(|i| {
                let mut v = [0.0; FEATURE_DIM];
                v[0] = (i % 3) as f64 * 4.0;
                v[1] = i as f64 * 0.01;
                (v, ClassLabel::from_index(i % 3).unwrap())
            })
            .collect();
        Classifier::train(
            ModelKind::Xgb,
            &TrainData::Frames(&rows),
            &TrainConfig { epochs: 10, ..TrainConfig::for_kind(ModelKind::Xgb) },
        )
        .unwrap()
    }

    fn stream_rows(n: usize) -> Vec<[f64; FEATURE_DIM]> {
        (0..n)
            .map(|i| {
                let mut v = [0.0; FEATURE_DIM];
                v[0] = (i % 3) as f64 * 4.0;
                v[1] = i as f64 * 0.01;
                v
            })
            .collect()
    }

    #[test]
    fn warm_up_then_first_decision_at_frame_20() {
        let model = frame_model();
        let mut session = StreamSession::new(&model);
        let rows = stream_rows(20);
        for (i, row) in rows.iter().enumerate() {
            let decision = session.push_frame(row).unwrap();
            if i < 19 {
                assert!(decision.is_none(), "frame {i} emitted early");
            } else {
                let d = decision.expect("20th frame must emit");
                assert_eq!(d.frame_index, 19);
                assert!(d.inference_latency > 0.0);
            }
        }
        assert_eq!(session.buffered(), 20);
    }

    #[test]
    fn replay_counts_decisions() {
        let model = frame_model();
        let mut session = StreamSession::new(&model);
        let decisions = replay(&mut session, &stream_rows(100), None).unwrap();
        assert_eq!(decisions.len(), 81); // 100 - 20 + 1
        // decisions arrive in frame order
        for w in decisions.windows(2) {
            assert!(w[1].frame_index > w[0].frame_index);
        }
    }

    #[test]
    fn emit_stride_spaces_decisions() {
        let model = frame_model();
        let mut session = StreamSession::with_emit_stride(&model, 5).unwrap();
        let decisions = replay(&mut session, &stream_rows(40), None).unwrap();
        let frames: Vec<usize> = decisions.iter().map(|d| d.frame_index).collect();
        assert_eq!(frames, vec![19, 24, 29, 34, 39]);
    }

    #[test]
    fn empty_replay_is_empty() {
        let model = frame_model();
        let mut session = StreamSession::new(&model);
        assert!(replay(&mut session, &[], None).unwrap().is_empty());
    }

    #[test]
    fn throttled_replay_matches_unthrottled_labels() {
        let model = frame_model();
        let rows = stream_rows(25);
        let mut a = StreamSession::new(&model);
        let unthrottled = replay(&mut a, &rows, None).unwrap();
        let mut b = StreamSession::new(&model);
        let throttled = replay(&mut b, &rows, Some(2000.0)).unwrap();
        assert_eq!(unthrottled.len(), throttled.len());
        for (x, y) in unthrottled.iter().zip(throttled.iter()) {
            assert_eq!(x.label, y.label);
            assert_eq!(x.scores, y.scores);
            assert_eq!(x.frame_index, y.frame_index);
        }
    }

    #[test]
    fn wrong_dimension_is_parameter_error() {
        let model = frame_model();
        let mut session = StreamSession::new(&model);
        assert!(matches!(session.push_slice(&[1.0, 2.0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn buffer_is_bounded_by_window() {
        let model = frame_model();
        let mut session = StreamSession::new(&model);
        for row in stream_rows(500) {
            session.push_frame(&row).unwrap();
        }
        assert_eq!(session.buffered(), 20);
        assert_eq!(session.frames_seen(), 500);
    }

    #[test]
    fn decision_label_is_argmax_of_scores() {
        let model = frame_model();
        let mut session = StreamSession::new(&model);
        for d in replay(&mut session, &stream_rows(60), None).unwrap() {
            let best = d
                .scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .unwrap()
                .0;
            assert_eq!(d.label.index(), best);
        }
    }

    #[test]
    fn json_line_has_pinned_fields() {
        let d = StateDecision {
            label: ClassLabel::Confused,
            scores: [0.1, 0.8, 0.1],
            frame_index: 25,
            inference_latency: 0.002,
        };
        let line = d.to_json_line();
        assert!(line.starts_with("{\"frame\":25,\"label\":\"confused\",\"scores\":["));
        assert!(line.contains("\"latency_s\":0.002"));
    }
}
