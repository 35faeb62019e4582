//! Command-line entry point: preprocess, train, evaluate, benchmark, stream.

use clap::{Args, Parser, Subcommand};
use mindstate::dataset::{
    load_band_csv_with, load_raw_sessions, split, split_subject_disjoint, write_band_csv,
    BandCsvOptions, LabeledDataset, RawSessionOptions, SplitSpec,
};
use mindstate::error::{Error, Result};
use mindstate::eval::{benchmark, emit_report, report_to_string, ReportFormat, TestSet};
use mindstate::features::{FEATURE_DIM, WINDOW_STRIDE, WINDOW_WIDTH};
use mindstate::models::{Classifier, InputMode, ModelKind, TrainConfig, TrainData};
use mindstate::signal::BandTable;
use mindstate::stream::StreamSession;
use mindstate::{ClassLabel, WindowMap};
use std::path::PathBuf;
use std::process::ExitCode;

fn default_seed() -> u64 {
    std::env::var("MINDSTATE_SEED").ok().and_then(|v| v.parse().ok()).unwrap_or(42)
}

#[derive(Parser)]
#[command(
    name = "mindstate",
    version,
    about = "EEG band-power mental-state classification toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Band-feature CSV (canonical schema or compatible)
    #[arg(long)]
    data: PathBuf,
    /// Demographics CSV `subject_id,gender,age` when the data file has no
    /// inline gender/age columns
    #[arg(long)]
    demographics: Option<PathBuf>,
    /// Column holding a binary confused/not-confused label
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Args, Clone)]
struct WindowArgs {
    /// Sliding-window width in frames
    #[arg(long, default_value_t = WINDOW_WIDTH)]
    window: usize,
    /// Window start stride in frames
    #[arg(long, default_value_t = WINDOW_STRIDE)]
    stride: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce raw sessions to the canonical band CSV, one row per 0.5 s frame
    Preprocess {
        /// Directory of `<subject>/<channel>.txt` + `<subject>/meta.txt`
        #[arg(long)]
        raw_dir: PathBuf,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
        /// Band bounds config (`delta=0.5:2.75` per line); defaults built in
        #[arg(long)]
        band_table: Option<PathBuf>,
        /// Channel to extract
        #[arg(long, default_value = "A1")]
        channel: String,
        /// High-pass cutoff in Hz
        #[arg(long, default_value_t = 0.5)]
        cutoff_hz: f64,
        /// Keep sessions whose metadata marks a non-expert subject
        #[arg(long)]
        include_novices: bool,
    },
    /// Train one classifier and write a model file
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Classifier kind: svm, dnn, cnn, xgb, or random
        #[arg(long)]
        kind: String,
        /// Output model path
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_seed())]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        split_fraction: f64,
        /// Split at subject granularity so no subject spans train and test
        #[arg(long)]
        subject_split: bool,
        /// Build sliding windows from the frames (required for cnn)
        #[arg(long)]
        windowed: bool,
        #[command(flatten)]
        window_args: WindowArgs,
        /// Override the kind's default epoch/round count
        #[arg(long)]
        epochs: Option<usize>,
        /// Override the kind's default batch size
        #[arg(long)]
        batch_size: Option<usize>,
        /// Override the kind's default learning rate
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Evaluate a saved model and report accuracy/CI/time/Potential
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Trained model file
        #[arg(long)]
        model: PathBuf,
        /// Report output path (prints to stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format: jsonl or csv
        #[arg(long, default_value = "jsonl")]
        format: String,
        /// Evaluate on the seeded test split instead of the whole file
        #[arg(long)]
        use_test_split: bool,
        #[arg(long, default_value_t = default_seed())]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        split_fraction: f64,
        /// Split at subject granularity so no subject spans train and test
        #[arg(long)]
        subject_split: bool,
        /// Timed full passes over the test set (median is reported)
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[command(flatten)]
        window_args: WindowArgs,
    },
    /// Train all five classifier kinds and emit a comparative report
    Benchmark {
        #[command(flatten)]
        data: DataArgs,
        /// Report output path
        #[arg(long)]
        out: PathBuf,
        /// Report format: jsonl or csv
        #[arg(long, default_value = "jsonl")]
        format: String,
        #[arg(long, default_value_t = default_seed())]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        split_fraction: f64,
        /// Split at subject granularity so no subject spans train and test
        #[arg(long)]
        subject_split: bool,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[command(flatten)]
        window_args: WindowArgs,
    },
    /// Replay a band CSV through a model, one json line per decision
    Stream {
        #[command(flatten)]
        data: DataArgs,
        /// Trained model file
        #[arg(long)]
        model: PathBuf,
        /// Throttle replay to 2 frames per second of wall-clock time
        #[arg(long)]
        throttle: bool,
        /// Frames between decisions once the window is warm
        #[arg(long, default_value_t = 1)]
        emit_stride: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn load_data(args: &DataArgs) -> Result<LabeledDataset> {
    let options = BandCsvOptions { label_column: args.label_column.clone() };
    load_band_csv_with(&args.data, args.demographics.as_deref(), &options)
}

fn frame_pairs(ds: &LabeledDataset) -> Vec<([f64; FEATURE_DIM], ClassLabel)> {
    ds.frames.iter().map(|r| (*r.features.values(), r.label)).collect()
}

fn window_pairs(ds: &LabeledDataset) -> Vec<(WindowMap, ClassLabel)> {
    ds.windows.iter().map(|r| (r.window.clone(), r.label)).collect()
}

fn split_dataset(
    ds: &LabeledDataset,
    fraction: f64,
    seed: u64,
    subject_split: bool,
) -> mindstate::Result<(LabeledDataset, LabeledDataset)> {
    let spec = SplitSpec::new(fraction, seed)?;
    if subject_split {
        split_subject_disjoint(ds, &spec)
    } else {
        split(ds, &spec)
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess { raw_dir, out, band_table, channel, cutoff_hz, include_novices } => {
            let table = match band_table {
                Some(path) => BandTable::from_config_file(&path)?,
                None => BandTable::default(),
            };
            let options = RawSessionOptions { band_table: table, highpass_cutoff_hz: cutoff_hz };
            let ds = load_raw_sessions(&raw_dir, &channel, !include_novices, &options)?;
            if ds.is_empty() {
                eprintln!("warning: no frames extracted from {}", raw_dir.display());
            }
            write_band_csv(&ds, &out)?;
            println!("wrote {} frames to {}", ds.frames.len(), out.display());
            Ok(())
        }

        Command::Train {
            data,
            kind,
            out,
            seed,
            split_fraction,
            subject_split,
            windowed,
            window_args,
            epochs,
            batch_size,
            learning_rate,
        } => {
            let kind = ModelKind::parse(&kind)?;
            if kind.input_mode() == InputMode::Window && !windowed {
                return Err(Error::Parameter(
                    "cnn consumes window maps built from consecutive frames; \
                     pass --windowed (with optional --window/--stride) to enable windowing"
                        .into(),
                ));
            }
            let mut ds = load_data(&data)?;
            if windowed {
                ds.build_windows(window_args.window, window_args.stride)?;
            }
            let (train_ds, test_ds) = split_dataset(&ds, split_fraction, seed, subject_split)?;

            let mut config = TrainConfig { seed, ..TrainConfig::for_kind(kind) };
            if let Some(e) = epochs {
                config.epochs = e;
            }
            if let Some(b) = batch_size {
                config.batch_size = b;
            }
            if let Some(lr) = learning_rate {
                config.learning_rate = lr;
            }

            let frames_train = frame_pairs(&train_ds);
            let windows_train = window_pairs(&train_ds);
            let model = match kind.input_mode() {
                InputMode::Frame => {
                    Classifier::train(kind, &TrainData::Frames(&frames_train), &config)?
                }
                InputMode::Window => {
                    Classifier::train(kind, &TrainData::Windows(&windows_train), &config)?
                }
            };
            model.save(&out)?;

            let counts = train_ds.class_counts();
            println!(
                "train rows: {} frames / {} windows (engaged {}, confused {}, relaxed {})",
                train_ds.frames.len(),
                train_ds.windows.len(),
                counts[0],
                counts[1],
                counts[2]
            );
            println!(
                "test rows: {} frames / {} windows",
                test_ds.frames.len(),
                test_ds.windows.len()
            );
            if let Some(summary) = model.summary() {
                println!("train accuracy: {:.4}", summary.train_accuracy);
                if let (Some(first), Some(last)) =
                    (summary.loss_curve.first(), summary.loss_curve.last())
                {
                    println!(
                        "loss: {:.6} -> {:.6} over {} epochs",
                        first,
                        last,
                        summary.loss_curve.len()
                    );
                }
            }
            println!("model written to {}", out.display());
            Ok(())
        }

        Command::Evaluate {
            data,
            model,
            out,
            format,
            use_test_split,
            seed,
            split_fraction,
            subject_split,
            repeats,
            window_args,
        } => {
            let format = ReportFormat::parse(&format)?;
            let model = Classifier::load(&model)?;
            let mut ds = load_data(&data)?;
            if model.input_mode() == InputMode::Window {
                ds.build_windows(model.window_width(), window_args.stride)?;
            }
            let eval_ds = if use_test_split {
                split_dataset(&ds, split_fraction, seed, subject_split)?.1
            } else {
                ds
            };
            let frames = frame_pairs(&eval_ds);
            let windows = window_pairs(&eval_ds);
            let test = TestSet { frames: &frames, windows: &windows };
            let named = [(model.kind().name().to_string(), &model)];
            let report = benchmark(&named, &test, repeats, seed)?;
            match out {
                Some(path) => {
                    emit_report(&report, &path, format)?;
                    println!("report written to {}", path.display());
                }
                None => print!("{}", report_to_string(&report, format)?),
            }
            Ok(())
        }

        Command::Benchmark {
            data,
            out,
            format,
            seed,
            split_fraction,
            subject_split,
            repeats,
            window_args,
        } => {
            let format = ReportFormat::parse(&format)?;
            let mut ds = load_data(&data)?;
            ds.build_windows(window_args.window, window_args.stride)?;
            let (train_ds, test_ds) = split_dataset(&ds, split_fraction, seed, subject_split)?;
            let frames_train = frame_pairs(&train_ds);
            let windows_train = window_pairs(&train_ds);
            let frames_test = frame_pairs(&test_ds);
            let windows_test = window_pairs(&test_ds);
            eprintln!(
                "training 5 models on {} frames / {} windows",
                frames_train.len(),
                windows_train.len()
            );

            let mut trained = Vec::new();
            for kind in ModelKind::ALL {
                let config = TrainConfig { seed, ..TrainConfig::for_kind(kind) };
                let model = match kind.input_mode() {
                    InputMode::Frame => {
                        Classifier::train(kind, &TrainData::Frames(&frames_train), &config)?
                    }
                    InputMode::Window => {
                        Classifier::train(kind, &TrainData::Windows(&windows_train), &config)?
                    }
                };
                if let Some(summary) = model.summary() {
                    eprintln!("  {kind}: train accuracy {:.4}", summary.train_accuracy);
                }
                trained.push((kind.name().to_string(), model));
            }
            let named: Vec<(String, &Classifier)> =
                trained.iter().map(|(n, m)| (n.clone(), m)).collect();
            let test = TestSet { frames: &frames_test, windows: &windows_test };
            let report = benchmark(&named, &test, repeats, seed)?;

            println!("model     accuracy  ci        eval_s      potential");
            for row in &report.rows {
                println!(
                    "{:<9} {:<9.4} {:<9.4} {:<11.6} {:<10.2}{}",
                    row.model,
                    row.accuracy,
                    row.ci,
                    row.eval_seconds,
                    row.potential,
                    if row.baseline_potential_zero { "  (0 by convention)" } else { "" }
                );
            }
            emit_report(&report, &out, format)?;
            println!("report written to {}", out.display());
            Ok(())
        }

        Command::Stream { data, model, throttle, emit_stride } => {
            let model = Classifier::load(&model)?;
            let ds = load_data(&data)?;
            let mut session = StreamSession::with_emit_stride(&model, emit_stride)?;
            let period = std::time::Duration::from_millis(500);
            let start = std::time::Instant::now();
            let mut emitted = 0usize;
            for (i, row) in ds.frames.iter().enumerate() {
                if throttle {
                    let due = period * i as u32;
                    let elapsed = start.elapsed();
                    if due > elapsed {
                        std::thread::sleep(due - elapsed);
                    }
                }
                if let Some(decision) = session.push_frame(row.features.values())? {
                    println!("{}", decision.to_json_line());
                    emitted += 1;
                }
            }
            eprintln!("{} frames in, {} decisions out", ds.frames.len(), emitted);
            Ok(())
        }
    }
}
