//! Evaluation protocol: accuracy, 95% confidence interval, timed test-set
//! passes, and the accuracy-per-second Potential metric, reported per model.

use crate::dataset::{ClassLabel, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::features::{WindowMap, FEATURE_DIM};
use crate::models::{Classifier, InputMode, ModelKind};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

/// Fraction of matching predictions.
pub fn accuracy(predictions: &[ClassLabel], labels: &[ClassLabel]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Parameter(format!(
            "prediction/label length mismatch: {} vs {}",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Parameter("cannot compute accuracy of zero predictions".into()));
    }
    let matches = predictions.iter().zip(labels.iter()).filter(|(p, l)| p == l).count();
    Ok(matches as f64 / predictions.len() as f64)
}

/// 95% confidence-interval halfwidth under the Gaussian approximation:
/// `1.96 * sqrt(accuracy * (1 - accuracy) / n)`.
pub fn confidence_interval(accuracy: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("confidence interval needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::Parameter(format!("accuracy must be in [0, 1], got {accuracy}")));
    }
    Ok(1.96 * (accuracy * (1.0 - accuracy) / n as f64).sqrt())
}

/// Accuracy per second of evaluation time.
pub fn potential(accuracy: f64, eval_seconds: f64) -> f64 {
    accuracy / eval_seconds
}

/// One model's evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub accuracy: f64,
    pub ci: f64,
    pub eval_seconds: f64,
    pub potential: f64,
    pub n_test: usize,
    pub seed: u64,
    pub confusion: [[u64; CLASS_COUNT]; CLASS_COUNT],
    /// The reference random guesser is assigned Potential 0 by convention;
    /// the computed value stays in `potential` so both views are derivable.
    pub baseline_potential_zero: bool,
}

/// Per-model evaluation records, one benchmark run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ModelReport>,
}

impl EvalReport {
    pub fn row(&self, model: &str) -> Option<&ModelReport> {
        self.rows.iter().find(|r| r.model == model)
    }
}

/// Test rows in both input modes; each model is timed against the set
/// matching its mode.
pub struct TestSet<'a> {
    pub frames: &'a [([f64; FEATURE_DIM], ClassLabel)],
    pub windows: &'a [(WindowMap, ClassLabel)],
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn predictions(model: &Classifier, test: &TestSet) -> Result<(Vec<ClassLabel>, Vec<ClassLabel>)> {
    match model.input_mode() {
        InputMode::Frame => {
            let mut preds = Vec::with_capacity(test.frames.len());
            let mut labels = Vec::with_capacity(test.frames.len());
            for (values, label) in test.frames {
                preds.push(model.predict_frame(values)?.0);
                labels.push(*label);
            }
            Ok((preds, labels))
        }
        InputMode::Window => {
            let mut preds = Vec::with_capacity(test.windows.len());
            let mut labels = Vec::with_capacity(test.windows.len());
            for (window, label) in test.windows {
                preds.push(model.predict_window(window)?.0);
                labels.push(*label);
            }
            Ok((preds, labels))
        }
    }
}

/// Evaluates each trained model on the test set: accuracy, CI, median
/// wall-clock of `repeats` full passes (after one warm pass), Potential, and
/// the confusion matrix. Runs models sequentially on the calling thread.
pub fn benchmark(
    models: &[(String, &Classifier)],
    test: &TestSet,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be positive".into()));
    }
    let mut report = EvalReport::default();
    for (name, model) in models {
        let n_test = match model.input_mode() {
            InputMode::Frame => test.frames.len(),
            InputMode::Window => test.windows.len(),
        };
        if n_test == 0 {
            return Err(Error::Parameter(format!(
                "empty test set for {} ({} mode)",
                name,
                match model.input_mode() {
                    InputMode::Frame => "frame",
                    InputMode::Window => "window",
                }
            )));
        }

        let (preds, labels) = predictions(model, test)?; // warm pass
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t0 = Instant::now();
            let _ = predictions(model, test)?;
            times.push(t0.elapsed().as_secs_f64().max(1e-12));
        }
        let eval_seconds = median(times);

        let acc = accuracy(&preds, &labels)?;
        let mut confusion = [[0u64; CLASS_COUNT]; CLASS_COUNT];
        for (p, l) in preds.iter().zip(labels.iter()) {
            confusion[l.index()][p.index()] += 1;
        }
        report.rows.push(ModelReport {
            model: name.clone(),
            accuracy: acc,
            ci: confidence_interval(acc, n_test)?,
            eval_seconds,
            potential: potential(acc, eval_seconds),
            n_test,
            seed,
            confusion,
            baseline_potential_zero: ModelKind::parse(name)
                .map(|k| k == ModelKind::Random)
                .unwrap_or(false),
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    JsonLines,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jsonl" | "json-lines" | "jsonlines" => Ok(ReportFormat::JsonLines),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Parameter(format!(
                "unknown report format `{other}` (expected jsonl or csv)"
            ))),
        }
    }
}

/// Renders the report deterministically; identical reports produce identical
/// bytes. Floats are written in shortest round-trip form, so parsing the file
/// back recovers every numeric field exactly.
pub fn report_to_string(report: &EvalReport, format: ReportFormat) -> Result<String> {
    let mut out = String::new();
    match format {
        ReportFormat::JsonLines => {
            for row in &report.rows {
                let line = serde_json::to_string(row)
                    .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
                out.push_str(&line);
                out.push('\n');
            }
        }
        ReportFormat::Csv => {
            out.push_str("model,accuracy,ci,eval_seconds,potential,n_test,seed\n");
            for row in &report.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.model,
                    row.accuracy,
                    row.ci,
                    row.eval_seconds,
                    row.potential,
                    row.n_test,
                    row.seed
                ));
            }
        }
    }
    Ok(out)
}

/// Writes the report to disk in the requested format.
pub fn emit_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<()> {
    std::fs::write(path, report_to_string(report, format)?)?;
    Ok(())
}

/// Parses a json-lines report back (the inverse of the JsonLines emitter).
pub fn parse_report_jsonl(text: &str) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        report.rows.push(
            serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("report parse: {e}")))?,
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn accuracy_basic_cases() {
        use ClassLabel::*;
        assert_eq!(accuracy(&[Engaged, Confused], &[Engaged, Confused]).unwrap(), 1.0);
        assert_eq!(
            accuracy(&[Engaged, Engaged, Confused, Relaxed], &[Engaged, Confused, Confused, Relaxed])
                .unwrap(),
            0.75
        );
        assert!(matches!(accuracy(&[Engaged], &[]), Err(Error::Parameter(_))));
    }

    #[test]
    fn confidence_interval_reference_values() {
        assert_relative_eq!(
            confidence_interval(0.5, 1451).unwrap(),
            0.02573,
            epsilon = 5e-6
        );
        assert_eq!(confidence_interval(1.0, 99).unwrap(), 0.0);
        assert_eq!(confidence_interval(0.0, 99).unwrap(), 0.0);
        assert!(confidence_interval(0.5, 0).is_err());
        assert!(confidence_interval(1.5, 10).is_err());
    }

    #[test]
    fn mean_ci_of_published_accuracies() {
        let accs = [0.792, 0.749, 0.703, 0.506];
        let mean: f64 =
            accs.iter().map(|a| confidence_interval(*a, 1451).unwrap()).sum::<f64>() / 4.0;
        assert!((mean - 0.0231).abs() < 0.0002, "mean CI {mean}");
    }

    #[test]
    fn potential_reference_value() {
        assert!((potential(0.749, 0.015) - 49.93).abs() < 0.01);
        assert_eq!(potential(0.0, 0.015), 0.0);
    }

    #[test]
    fn csv_format_is_pinned() {
        let report = EvalReport {
            rows: vec![ModelReport {
                model: "xgb".into(),
                accuracy: 0.75,
                ci: 0.02,
                eval_seconds: 0.015,
                potential: 50.0,
                n_test: 100,
                seed: 42,
                confusion: [[25, 0, 0], [0, 25, 0], [0, 0, 25]],
                baseline_potential_zero: false,
            }],
        };
        let text = report_to_string(&report, ReportFormat::Csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "model,accuracy,ci,eval_seconds,potential,n_test,seed");
        assert_eq!(lines.next().unwrap(), "xgb,0.75,0.02,0.015,50,100,42");
    }

    #[test]
    fn jsonl_round_trips_numeric_fields_exactly() {
        let report = EvalReport {
            rows: vec![ModelReport {
                model: "dnn".into(),
                accuracy: 0.7031234567891234,
                ci: 0.02345678901234568,
                eval_seconds: 0.5123456789012345,
                potential: 1.3724310029815416,
                n_test: 1451,
                seed: 42,
                confusion: [[100, 2, 3], [4, 200, 6], [7, 8, 300]],
                baseline_potential_zero: false,
            }],
        };
        let text = report_to_string(&report, ReportFormat::JsonLines).unwrap();
        let parsed = parse_report_jsonl(&text).unwrap();
        assert_eq!(parsed, report);
        // re-emitting is byte-identical
        assert_eq!(report_to_string(&parsed, ReportFormat::JsonLines).unwrap(), text);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ci_is_maximized_at_half(acc in 0.0f64..=1.0) {
            let at_half = confidence_interval(0.5, 500).unwrap();
            prop_assert!(confidence_interval(acc, 500).unwrap() <= at_half + 1e-15);
        }

        #[test]
        fn ci_decreases_with_n(n in 1usize..10_000) {
            let a = confidence_interval(0.3, n).unwrap();
            let b = confidence_interval(0.3, n + 1).unwrap();
            prop_assert!(b <= a);
        }
    }
}
