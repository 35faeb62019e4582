//! Mental-state classification from EEG band-power features.
//!
//! The pipeline runs raw single-channel voltage traces (or pre-binned band
//! CSVs) through DC removal, framed FFT band-power extraction, and
//! 11-dimensional feature assembly, then classifies each 0.5 s frame — or a
//! 20-frame sliding window — as engaged, confused, or relaxed. Five
//! classifier families share one trained-model abstraction, an evaluation
//! harness reports accuracy / confidence intervals / timing / Potential, and
//! a streaming engine replays or receives frames at 2 Hz for live decisions.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod signal;
pub mod stream;
pub mod synth;

pub use dataset::{ClassLabel, LabeledDataset, SplitSpec};
pub use error::{Error, Result};
pub use features::{Demographics, FrameFeatures, NormalizationStats, WindowMap};
pub use models::{Classifier, ModelKind, TrainConfig, TrainData};
pub use signal::{BandPowers, BandTable, RawSegment};
pub use stream::{StateDecision, StreamSession};
