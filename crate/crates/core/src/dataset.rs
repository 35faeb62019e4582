//! Dataset ingestion, labeling, and seeded splits.
//!
//! Two input shapes are supported:
//!
//! * band CSV — one pre-binned 8-band row per 0.5 s frame, header-driven;
//! * raw sessions — one directory per subject holding per-channel voltage
//!   files plus a `meta.txt`, reduced through the signal pipeline.
//!
//! The canonical band CSV schema written by `mindstate preprocess` is
//! `subject_id,session,frame,delta,theta,alpha1,alpha2,beta1,beta2,gamma1,gamma2,gender,age,label`
//! with `label` an integer class index. Loaders additionally accept files that
//! carry a binary confusion column instead of `label`, and files without
//! inline `gender`/`age` columns when a demographics CSV
//! (`subject_id,gender,age`) is supplied for the join.

use crate::error::{Error, Result};
use crate::features::{
    assemble, window_label, windows, Demographics, FrameFeatures, Gender, WindowMap, FEATURE_DIM,
};
use crate::signal::{frame_band_powers, high_pass, BandTable, RawSegment, BAND_COUNT, BAND_NAMES};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

/// The three mental-state classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ClassLabel {
    Engaged = 0,
    Confused = 1,
    Relaxed = 2,
}

/// Number of classes.
pub const CLASS_COUNT: usize = 3;

impl ClassLabel {
    pub const ALL: [ClassLabel; CLASS_COUNT] =
        [ClassLabel::Engaged, ClassLabel::Confused, ClassLabel::Relaxed];

    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(ClassLabel::Engaged),
            1 => Ok(ClassLabel::Confused),
            2 => Ok(ClassLabel::Relaxed),
            other => Err(Error::Data(format!("class label {other} out of range 0..=2"))),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Engaged => "engaged",
            ClassLabel::Confused => "confused",
            ClassLabel::Relaxed => "relaxed",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    BandCsv,
    RawSession,
}

/// One labeled frame with provenance.
#[derive(Debug, Clone)]
pub struct FrameRow {
    pub features: FrameFeatures,
    pub label: ClassLabel,
    pub session: String,
    pub source: Provenance,
}

/// One labeled window (built from frames of a single subject-session).
#[derive(Debug, Clone)]
pub struct WindowRow {
    pub window: WindowMap,
    pub label: ClassLabel,
    pub subject: String,
    pub session: String,
}

/// Labeled frames plus (optionally) labeled windows built from them.
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub frames: Vec<FrameRow>,
    pub windows: Vec<WindowRow>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty() && self.windows.is_empty()
    }

    /// Frame counts per class, indexed by [`ClassLabel::index`].
    pub fn class_counts(&self) -> [usize; CLASS_COUNT] {
        let mut counts = [0; CLASS_COUNT];
        for row in &self.frames {
            counts[row.label.index()] += 1;
        }
        counts
    }

    pub fn window_class_counts(&self) -> [usize; CLASS_COUNT] {
        let mut counts = [0; CLASS_COUNT];
        for row in &self.windows {
            counts[row.label.index()] += 1;
        }
        counts
    }

    /// Builds sliding windows per subject-session (never across boundaries),
    /// labeling each by the majority label of its frames.
    pub fn build_windows(&mut self, width: usize, stride: usize) -> Result<()> {
        let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for (i, row) in self.frames.iter().enumerate() {
            groups
                .entry((row.features.subject_id.clone(), row.session.clone()))
                .or_default()
                .push(i);
        }
        let mut out = Vec::new();
        for ((subject, session), mut idxs) in groups {
            idxs.sort_by_key(|&i| self.frames[i].features.frame_index);
            let frames: Vec<FrameFeatures> =
                idxs.iter().map(|&i| self.frames[i].features.clone()).collect();
            let labels: Vec<ClassLabel> = idxs.iter().map(|&i| self.frames[i].label).collect();
            for w in windows(&frames, width, stride)? {
                let lab = window_label(&labels[w.start_frame..w.start_frame + width]);
                out.push(WindowRow {
                    window: w,
                    label: lab,
                    subject: subject.clone(),
                    session: session.clone(),
                });
            }
        }
        self.windows = out;
        Ok(())
    }
}

/// Shuffled split specification. Defaults: 80% train, seed 42.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "train fraction must be in (0, 1), got {train_fraction}"
            )));
        }
        Ok(Self { train_fraction, seed })
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, seed: 42 }
    }
}

fn split_indices(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Deterministic seeded shuffle-and-split at row granularity.
///
/// `|train| = round(fraction * n)` per row collection; every row lands in
/// exactly one side.
pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    SplitSpec::new(spec.train_fraction, spec.seed)?;
    let n = if ds.frames.is_empty() { ds.windows.len() } else { ds.frames.len() };
    if n < 5 {
        return Err(Error::Parameter(format!(
            "dataset too small to split: {n} rows (need at least 5)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = LabeledDataset::default();
    let mut test = LabeledDataset::default();
    if !ds.frames.is_empty() {
        let (tr, te) = split_indices(ds.frames.len(), spec.train_fraction, &mut rng);
        train.frames = tr.into_iter().map(|i| ds.frames[i].clone()).collect();
        test.frames = te.into_iter().map(|i| ds.frames[i].clone()).collect();
    }
    if !ds.windows.is_empty() {
        let (tr, te) = split_indices(ds.windows.len(), spec.train_fraction, &mut rng);
        train.windows = tr.into_iter().map(|i| ds.windows[i].clone()).collect();
        test.windows = te.into_iter().map(|i| ds.windows[i].clone()).collect();
    }
    Ok((train, test))
}

/// Splits at subject granularity: every subject's rows land wholly on one
/// side, so no subject identity leaks from train to test. Subjects are
/// shuffled by seed and assigned to the training side until it holds at
/// least `train_fraction` of the frame rows (row sizes are therefore
/// approximate). Off by default: the row-level [`split`] matches the
/// original protocol.
pub fn split_subject_disjoint(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset)> {
    SplitSpec::new(spec.train_fraction, spec.seed)?;
    if ds.frames.len() < 5 {
        return Err(Error::Parameter(format!(
            "dataset too small to split: {} rows (need at least 5)",
            ds.frames.len()
        )));
    }
    let mut subjects: Vec<String> = ds
        .frames
        .iter()
        .map(|r| r.features.subject_id.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if subjects.len() < 2 {
        return Err(Error::Parameter(
            "subject-disjoint split needs at least 2 subjects".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    subjects.shuffle(&mut rng);

    let mut per_subject: BTreeMap<&str, usize> = BTreeMap::new();
    for row in &ds.frames {
        *per_subject.entry(row.features.subject_id.as_str()).or_insert(0) += 1;
    }
    let target = (ds.frames.len() as f64 * spec.train_fraction).round() as usize;
    let mut train_subjects: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    let mut covered = 0usize;
    for s in &subjects {
        if covered >= target || train_subjects.len() == subjects.len() - 1 {
            break;
        }
        covered += per_subject[s.as_str()];
        train_subjects.insert(s.as_str());
    }

    let mut train = LabeledDataset::default();
    let mut test = LabeledDataset::default();
    for row in &ds.frames {
        if train_subjects.contains(row.features.subject_id.as_str()) {
            train.frames.push(row.clone());
        } else {
            test.frames.push(row.clone());
        }
    }
    for row in &ds.windows {
        if train_subjects.contains(row.subject.as_str()) {
            train.windows.push(row.clone());
        } else {
            test.windows.push(row.clone());
        }
    }
    Ok((train, test))
}

/// Options for [`load_band_csv_with`].
#[derive(Debug, Clone, Default)]
pub struct BandCsvOptions {
    /// Column holding a binary confused/not-confused label. When unset, the
    /// loader uses a 3-class `label` column if present, else one of the known
    /// binary column spellings.
    pub label_column: Option<String>,
}

const BINARY_LABEL_COLUMNS: [&str; 4] =
    ["confused", "confusion", "user-definedlabeln", "user_definedlabeln"];

fn header_lookup(headers: &csv::StringRecord) -> BTreeMap<String, usize> {
    headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
        .collect()
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    line: u64,
    what: &str,
) -> Result<T> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse().map_err(|_| {
        Error::Data(format!("line {line}: cannot parse {what} from `{raw}`"))
    })
}

/// Loads a band-feature CSV with default options.
pub fn load_band_csv(path: &Path, demographics: Option<&Path>) -> Result<LabeledDataset> {
    load_band_csv_with(path, demographics, &BandCsvOptions::default())
}

/// Loads a band-feature CSV. Parsing is header-driven: column order never
/// matters. Demographics come from inline `gender`/`age` columns or from the
/// join file; a subject missing from the join is a data error listing the ids.
pub fn load_band_csv_with(
    path: &Path,
    demographics: Option<&Path>,
    options: &BandCsvOptions,
) -> Result<LabeledDataset> {
    let demo_map = demographics.map(load_demographics).transpose()?;
    let mut reader =
        csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_error)?;
    let lookup = header_lookup(reader.headers().map_err(csv_error)?);

    let require = |name: &str| -> Result<usize> {
        lookup
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };

    let subject_idx = lookup
        .get("subject_id")
        .or_else(|| lookup.get("subjectid"))
        .or_else(|| lookup.get("subject"))
        .copied()
        .ok_or_else(|| Error::Schema("missing column `subject_id`".into()))?;
    let session_idx = lookup.get("session").or_else(|| lookup.get("videoid")).copied();
    let frame_idx = lookup.get("frame").copied();
    let mut band_idx = [0usize; BAND_COUNT];
    for (b, name) in BAND_NAMES.iter().enumerate() {
        band_idx[b] = require(name)?;
    }
    let gender_idx = lookup.get("gender").copied();
    let age_idx = lookup.get("age").copied();
    let inline_demo = gender_idx.is_some() && age_idx.is_some();
    if !inline_demo && demo_map.is_none() {
        return Err(Error::Schema(
            "missing column `gender`/`age` and no demographics file supplied".into(),
        ));
    }

    enum LabelSource {
        ThreeClass(usize),
        Binary(usize),
    }
    let label_source = if let Some(name) = &options.label_column {
        LabelSource::Binary(require(&name.to_ascii_lowercase())?)
    } else if let Some(&idx) = lookup.get("label") {
        LabelSource::ThreeClass(idx)
    } else if let Some(&idx) = BINARY_LABEL_COLUMNS.iter().find_map(|c| lookup.get(*c)) {
        LabelSource::Binary(idx)
    } else {
        return Err(Error::Schema("missing column `label`".into()));
    };

    let mut ds = LabeledDataset::default();
    let mut unknown_subjects: Vec<String> = Vec::new();
    let mut per_session_counter: BTreeMap<(String, String), usize> = BTreeMap::new();

    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = row_no as u64 + 2; // 1-based, after header
        let subject = record.get(subject_idx).unwrap_or("").trim().to_string();
        let session = session_idx
            .map(|i| record.get(i).unwrap_or("0").trim().to_string())
            .unwrap_or_else(|| "0".to_string());

        let demo = if inline_demo {
            let gender = Gender::parse(record.get(gender_idx.unwrap()).unwrap_or(""))?;
            let age: f64 = parse_field(&record, age_idx.unwrap(), line, "age")?;
            Demographics::new(gender, age)?
        } else {
            match demo_map.as_ref().unwrap().get(&subject) {
                Some(d) => *d,
                None => {
                    if !unknown_subjects.contains(&subject) {
                        unknown_subjects.push(subject.clone());
                    }
                    continue;
                }
            }
        };

        let mut values = [0.0; FEATURE_DIM];
        for b in 0..BAND_COUNT {
            values[b] = parse_field(&record, band_idx[b], line, BAND_NAMES[b])?;
        }
        let one_hot = demo.gender.one_hot();
        values[8] = one_hot[0];
        values[9] = one_hot[1];
        values[10] = demo.age;

        let label = match &label_source {
            LabelSource::ThreeClass(idx) => {
                let v: f64 = parse_field(&record, *idx, line, "label")?;
                ClassLabel::from_index(v as usize).map_err(|_| {
                    Error::Data(format!("line {line}: label `{v}` out of range 0..=2"))
                })?
            }
            LabelSource::Binary(idx) => {
                let v: f64 = parse_field(&record, *idx, line, "binary label")?;
                match v as i64 {
                    0 => ClassLabel::Engaged,
                    1 => ClassLabel::Confused,
                    other => {
                        return Err(Error::Data(format!(
                            "line {line}: binary label must be 0 or 1, got {other}"
                        )))
                    }
                }
            }
        };

        let counter = per_session_counter.entry((subject.clone(), session.clone())).or_insert(0);
        let frame_index = match frame_idx {
            Some(i) => parse_field::<usize>(&record, i, line, "frame index")?,
            None => *counter,
        };
        *counter += 1;

        ds.frames.push(FrameRow {
            features: FrameFeatures::from_values(values, subject, frame_index)?,
            label,
            session,
            source: Provenance::BandCsv,
        });
    }

    if !unknown_subjects.is_empty() {
        return Err(Error::Data(format!(
            "subjects missing from demographics file: {}",
            unknown_subjects.join(", ")
        )));
    }
    Ok(ds)
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Data(format!("csv: {other:?}")),
        }
    } else {
        Error::Data(format!("csv: {e}"))
    }
}

fn load_demographics(path: &Path) -> Result<BTreeMap<String, Demographics>> {
    let mut reader =
        csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_error)?;
    let lookup = header_lookup(reader.headers().map_err(csv_error)?);
    let subject_idx = lookup
        .get("subject_id")
        .or_else(|| lookup.get("subjectid"))
        .or_else(|| lookup.get("subject"))
        .copied()
        .ok_or_else(|| Error::Schema("demographics: missing column `subject_id`".into()))?;
    let gender_idx = *lookup
        .get("gender")
        .ok_or_else(|| Error::Schema("demographics: missing column `gender`".into()))?;
    let age_idx = *lookup
        .get("age")
        .ok_or_else(|| Error::Schema("demographics: missing column `age`".into()))?;

    let mut map = BTreeMap::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = row_no as u64 + 2;
        let subject = record.get(subject_idx).unwrap_or("").trim().to_string();
        let gender = Gender::parse(record.get(gender_idx).unwrap_or(""))?;
        let age: f64 = parse_field(&record, age_idx, line, "age")?;
        map.insert(subject, Demographics::new(gender, age)?);
    }
    Ok(map)
}

/// Options for [`load_raw_sessions`].
#[derive(Debug, Clone)]
pub struct RawSessionOptions {
    pub band_table: BandTable,
    pub highpass_cutoff_hz: f64,
}

impl Default for RawSessionOptions {
    fn default() -> Self {
        Self { band_table: BandTable::default(), highpass_cutoff_hz: 0.5 }
    }
}

/// Subject metadata parsed from `meta.txt`.
#[derive(Debug, Clone)]
struct SessionMeta {
    demographics: Demographics,
    expert: bool,
}

fn load_meta(path: &Path) -> Result<SessionMeta> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read metadata {}: {e}", path.display())))?;
    let mut gender = None;
    let mut age = None;
    let mut expertise = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            match k.trim().to_ascii_lowercase().as_str() {
                "gender" => gender = Some(Gender::parse(v)?),
                "age" => {
                    age = Some(v.trim().parse::<f64>().map_err(|_| {
                        Error::Data(format!("{}: bad age `{}`", path.display(), v.trim()))
                    })?)
                }
                "expertise" => expertise = Some(v.trim().to_ascii_lowercase()),
                _ => {}
            }
        }
    }
    let gender = gender
        .ok_or_else(|| Error::Data(format!("{}: missing `gender`", path.display())))?;
    let age = age.ok_or_else(|| Error::Data(format!("{}: missing `age`", path.display())))?;
    let expertise = expertise
        .ok_or_else(|| Error::Data(format!("{}: missing `expertise`", path.display())))?;
    Ok(SessionMeta {
        demographics: Demographics::new(gender, age)?,
        expert: expertise == "expert",
    })
}

fn load_channel_file(path: &Path) -> Result<RawSegment> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read channel {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty channel file", path.display())))?;
    let rate: u32 = header
        .trim()
        .strip_prefix("sample_rate=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| {
            Error::Data(format!("{}: first line must be `sample_rate=<int>`", path.display()))
        })?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        samples.push(line.parse::<f64>().map_err(|_| {
            Error::Data(format!("{}: bad sample on line {}", path.display(), i + 2))
        })?);
    }
    let channel = path.file_stem().and_then(|s| s.to_str()).unwrap_or("channel").to_string();
    RawSegment::new(samples, rate, channel)
}

/// Loads raw sessions laid out as `<dir>/<subject>/<channel>.txt` plus
/// `<dir>/<subject>/meta.txt`, running the full signal pipeline
/// (high-pass, framed FFT, feature assembly). Every frame is labeled
/// Relaxed; non-expert sessions are skipped when `expert_only` is set.
///
/// An empty directory yields an empty dataset, not an error.
pub fn load_raw_sessions(
    dir: &Path,
    channel: &str,
    expert_only: bool,
    options: &RawSessionOptions,
) -> Result<LabeledDataset> {
    let mut ds = LabeledDataset::default();
    if !dir.is_dir() {
        return Err(Error::Data(format!("{} is not a directory", dir.display())));
    }
    let mut subjects: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    subjects.sort();

    for subject_dir in subjects {
        let subject = subject_dir
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("subject")
            .to_string();
        let meta = load_meta(&subject_dir.join("meta.txt"))?;
        if expert_only && !meta.expert {
            continue;
        }
        let channel_path = subject_dir.join(format!("{channel}.txt"));
        if !channel_path.is_file() {
            return Err(Error::Data(format!(
                "subject `{subject}`: requested channel `{channel}` not found"
            )));
        }
        let segment = load_channel_file(&channel_path)?;
        let filtered = high_pass(&segment, options.highpass_cutoff_hz)?;
        for powers in frame_band_powers(&filtered, &options.band_table)? {
            let features = assemble(&powers, &meta.demographics, &subject);
            ds.frames.push(FrameRow {
                features,
                label: ClassLabel::Relaxed,
                session: subject.clone(),
                source: Provenance::RawSession,
            });
        }
    }
    Ok(ds)
}

/// Writes the canonical band CSV schema, one row per frame whose field
/// formatting round-trips exactly. Re-running on identical data produces a
/// byte-identical file.
pub fn write_band_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("subject_id,session,frame,");
    out.push_str(&BAND_NAMES.join(","));
    out.push_str(",gender,age,label\n");
    for row in &ds.frames {
        let v = row.features.values();
        let gender = if v[8] == 1.0 { "f" } else { "m" };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.features.subject_id,
            row.session,
            row.features.frame_index,
            v[..BAND_COUNT].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            gender,
            v[10],
            row.label.index(),
        ));
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
