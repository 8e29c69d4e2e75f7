//! Domain types, CSV ingestion of sensor captures and time-axis reduction.
//!
//! The input format is a headed CSV with one row per raw sample:
//!
//! ```text
//! label,trial,sample_index,s1,s2,s3,s4,s5,s6
//! KW1,1,0,412.0,388.5,...
//! ```
//!
//! Rows sharing `(label, trial)` form one [`TrialCapture`]. Sensor columns
//! must be named `s1..sN` in order; the default six map onto the sensor
//! array through [`CANONICAL_SENSORS`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

/// Column-to-sensor map for `s1..s6`.
pub const CANONICAL_SENSORS: [&str; 6] = ["TGS825", "TGS826", "TGS822", "TGS813", "TGS2620", "TGS2611"];

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: u64, reason: String },
    #[error("trial {label}/{trial} has {found} samples, expected {expected}")]
    WrongSampleCount {
        label: QualityLabel,
        trial: u32,
        found: usize,
        expected: usize,
    },
    #[error("unknown quality label {0:?} (expected KW1, KW2 or KW3)")]
    UnknownLabel(String),
    #[error("invalid sample at line {line}: {value} (ADC counts must be finite and >= 0)")]
    InvalidSample { line: u64, value: f64 },
    #[error("{raw} raw samples cannot be reduced to {reduced} equal blocks")]
    IndivisibleBlockSize { raw: usize, reduced: usize },
    #[error("invalid sampling spec: {0}")]
    InvalidSampling(String),
    #[error("trials disagree on sensor count ({first} vs {other})")]
    InconsistentSensorCount { first: usize, other: usize },
    #[error("class {0} is missing from the pattern matrix")]
    MissingClass(QualityLabel),
    #[error("class {0} appears more than once in one replication")]
    DuplicateClass(QualityLabel),
    #[error("no trials supplied")]
    Empty,
    #[error("sensor index {index} out of range for {count} sensors")]
    BadSensorIndex { index: usize, count: usize },
    #[error("io error: {0}")]
    Io(String),
}

/// Sampling rate and the raw/reduced sample counts of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub sample_rate_hz: f64,
    pub raw_samples_per_trial: usize,
    pub reduced_samples_per_trial: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: 3.0,
            raw_samples_per_trial: 60,
            reduced_samples_per_trial: 20,
        }
    }
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(DataError::InvalidSampling(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if self.raw_samples_per_trial == 0 {
            return Err(DataError::InvalidSampling("raw sample count must be positive".into()));
        }
        self.block_size().map(|_| ())
    }

    /// Number of raw samples folded into one reduced sample.
    pub fn block_size(&self) -> Result<usize, DataError> {
        let (raw, reduced) = (self.raw_samples_per_trial, self.reduced_samples_per_trial);
        if reduced == 0 || raw % reduced != 0 {
            return Err(DataError::IndivisibleBlockSize { raw, reduced });
        }
        Ok(raw / reduced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityLabel {
    KW1,
    KW2,
    KW3,
}

impl QualityLabel {
    pub const ALL: [QualityLabel; 3] = [QualityLabel::KW1, QualityLabel::KW2, QualityLabel::KW3];

    pub fn index(self) -> usize {
        match self {
            QualityLabel::KW1 => 0,
            QualityLabel::KW2 => 1,
            QualityLabel::KW3 => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QualityLabel::KW1 => "KW1",
            QualityLabel::KW2 => "KW2",
            QualityLabel::KW3 => "KW3",
        }
    }
}

impl fmt::Display for QualityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QualityLabel {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "KW1" => Ok(QualityLabel::KW1),
            "KW2" => Ok(QualityLabel::KW2),
            "KW3" => Ok(QualityLabel::KW3),
            other => Err(DataError::UnknownLabel(other.to_string())),
        }
    }
}

/// How a trial is shortened from the raw to the reduced sample count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReduceMethod {
    /// Mean of each non-overlapping block of `k` samples.
    #[default]
    BlockMean,
    /// First sample of each block.
    TakeEveryKth,
}

/// One odorant exposure: `raw_samples_per_trial` rows by one column per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialCapture {
    pub label: QualityLabel,
    pub trial_index: u32,
    pub samples: Matrix,
    pub sensor_names: Vec<String>,
}

impl TrialCapture {
    pub fn sensor_count(&self) -> usize {
        self.samples.ncols()
    }

    /// Drops sensors by 0-based position, keeping the remaining order.
    pub fn without_sensors(&self, drop: &[usize]) -> Result<TrialCapture, DataError> {
        let count = self.sensor_count();
        if let Some(&index) = drop.iter().find(|&&i| i >= count) {
            return Err(DataError::BadSensorIndex { index, count });
        }
        let keep: Vec<usize> = (0..count).filter(|i| !drop.contains(i)).collect();
        Ok(TrialCapture {
            label: self.label,
            trial_index: self.trial_index,
            samples: self.samples.select_columns(&keep),
            sensor_names: keep.iter().map(|&i| self.sensor_names[i].clone()).collect(),
        })
    }
}

/// Sensor name for 0-based column `i` under the canonical map.
pub fn sensor_name(i: usize) -> String {
    CANONICAL_SENSORS
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("s{}", i + 1))
}

/// Pattern vectors grouped by class: rows are reduced time instants, columns
/// are sensor features.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMatrix {
    pub rows: Matrix,
    pub row_labels: Vec<QualityLabel>,
    /// 1-based, contiguous.
    pub row_ids: Vec<usize>,
    /// Source trial index of each row.
    pub row_trials: Vec<u32>,
    pub sensor_names: Vec<String>,
    /// True when all three classes are present.
    pub complete: bool,
}

impl PatternMatrix {
    pub fn require_complete(&self) -> Result<(), DataError> {
        match QualityLabel::ALL.iter().find(|l| !self.row_labels.contains(l)) {
            Some(&missing) => Err(DataError::MissingClass(missing)),
            None => Ok(()),
        }
    }

    /// Row indices (0-based) of each contiguous class block, in KW1..KW3 order.
    pub fn class_blocks(&self) -> Vec<(QualityLabel, std::ops::Range<usize>)> {
        let mut blocks: Vec<(QualityLabel, std::ops::Range<usize>)> = Vec::new();
        for (i, &label) in self.row_labels.iter().enumerate() {
            match blocks.last_mut() {
                Some((l, r)) if *l == label => r.end = i + 1,
                _ => blocks.push((label, i..i + 1)),
            }
        }
        blocks
    }
}

fn malformed(line: u64, reason: impl Into<String>) -> DataError {
    DataError::MalformedCsv {
        line,
        reason: reason.into(),
    }
}

fn check_header(header: &csv::StringRecord) -> Result<usize, DataError> {
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields.len() < 4 || fields[..3] != ["label", "trial", "sample_index"] {
        return Err(malformed(1, "header must start with label,trial,sample_index"));
    }
    for (i, f) in fields[3..].iter().enumerate() {
        if *f != format!("s{}", i + 1) {
            return Err(malformed(1, format!("expected sensor column s{}, found {f:?}", i + 1)));
        }
    }
    Ok(fields.len() - 3)
}

/// `(sample_index, values)` of one CSV row.
type IndexedRow = (usize, Vec<f64>);

/// Parses the capture CSV into one [`TrialCapture`] per `(label, trial)` group,
/// ordered by label then trial index.
pub fn parse_dataset<R: Read>(source: R, spec: &SamplingSpec) -> Result<Vec<TrialCapture>, DataError> {
    spec.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let sensor_count = check_header(&header)?;

    let mut groups: BTreeMap<(QualityLabel, u32), Vec<IndexedRow>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != sensor_count + 3 {
            return Err(malformed(line, format!("expected {} fields, found {}", sensor_count + 3, record.len())));
        }
        let label: QualityLabel = record[0].parse()?;
        let trial: u32 = record[1]
            .parse()
            .map_err(|_| malformed(line, format!("bad trial {:?}", &record[1])))?;
        if trial == 0 {
            return Err(malformed(line, "trial numbers start at 1"));
        }
        let sample_index: usize = record[2]
            .parse()
            .map_err(|_| malformed(line, format!("bad sample_index {:?}", &record[2])))?;
        let mut values = Vec::with_capacity(sensor_count);
        for cell in record.iter().skip(3) {
            let v: f64 = cell
                .parse()
                .map_err(|_| malformed(line, format!("non-numeric cell {cell:?}")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(DataError::InvalidSample { line, value: v });
            }
            values.push(v);
        }
        groups.entry((label, trial)).or_default().push((sample_index, values));
    }

    let expected = spec.raw_samples_per_trial;
    let names: Vec<String> = (0..sensor_count).map(sensor_name).collect();
    groups
        .into_iter()
        .map(|((label, trial), mut rows)| {
            if rows.len() != expected {
                return Err(DataError::WrongSampleCount {
                    label,
                    trial,
                    found: rows.len(),
                    expected,
                });
            }
            rows.sort_by_key(|(idx, _)| *idx);
            if rows.iter().enumerate().any(|(i, (idx, _))| *idx != i) {
                return Err(malformed(
                    0,
                    format!("trial {label}/{trial}: sample_index must cover 0..{expected} exactly once"),
                ));
            }
            let data: Vec<Vec<f64>> = rows.into_iter().map(|(_, v)| v).collect();
            Ok(TrialCapture {
                label,
                trial_index: trial,
                samples: Matrix::from_rows(&data),
                sensor_names: names.clone(),
            })
        })
        .collect()
}

/// Writes captures in the same CSV layout [`parse_dataset`] reads.
pub fn write_dataset<W: Write>(sink: W, trials: &[TrialCapture]) -> Result<(), DataError> {
    let sensor_count = trials.first().map_or(0, TrialCapture::sensor_count);
    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec!["label".to_string(), "trial".into(), "sample_index".into()];
    header.extend((1..=sensor_count).map(|i| format!("s{i}")));
    let io = |e: csv::Error| DataError::Io(e.to_string());
    writer.write_record(&header).map_err(io)?;
    for t in trials {
        if t.sensor_count() != sensor_count {
            return Err(DataError::InconsistentSensorCount {
                first: sensor_count,
                other: t.sensor_count(),
            });
        }
        for (i, row) in t.samples.rows_iter().enumerate() {
            let mut rec = vec![t.label.to_string(), t.trial_index.to_string(), i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&rec).map_err(io)?;
        }
    }
    writer.flush().map_err(|e| DataError::Io(e.to_string()))
}

/// Reduces a trial along time to `reduced_samples_per_trial` rows.
pub fn downsample(trial: &TrialCapture, spec: &SamplingSpec, method: ReduceMethod) -> Result<Matrix, DataError> {
    let k = spec.block_size()?;
    let raw = trial.samples.nrows();
    if raw != spec.raw_samples_per_trial {
        return Err(DataError::WrongSampleCount {
            label: trial.label,
            trial: trial.trial_index,
            found: raw,
            expected: spec.raw_samples_per_trial,
        });
    }
    let cols = trial.samples.ncols();
    Ok(Matrix::from_fn(spec.reduced_samples_per_trial, cols, |j, c| match method {
        ReduceMethod::BlockMean => {
            (j * k..(j + 1) * k).map(|r| trial.samples[(r, c)]).sum::<f64>() / k as f64
        }
        ReduceMethod::TakeEveryKth => trial.samples[(j * k, c)],
    }))
}

/// Stacks one trial per class into a pattern matrix, classes in KW1..KW3 order.
pub fn build_pattern_matrix(
    trials: &[TrialCapture],
    spec: &SamplingSpec,
    method: ReduceMethod,
) -> Result<PatternMatrix, DataError> {
    let first = trials.first().ok_or(DataError::Empty)?;
    let n = first.sensor_count();
    if let Some(t) = trials.iter().find(|t| t.sensor_count() != n) {
        return Err(DataError::InconsistentSensorCount {
            first: n,
            other: t.sensor_count(),
        });
    }
    let mut ordered: Vec<&TrialCapture> = trials.iter().collect();
    ordered.sort_by_key(|t| t.label);
    if let Some(w) = ordered.windows(2).find(|w| w[0].label == w[1].label) {
        return Err(DataError::DuplicateClass(w[0].label));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut row_labels = Vec::new();
    let mut row_trials = Vec::new();
    for t in &ordered {
        let reduced = downsample(t, spec, method)?;
        for r in reduced.rows_iter() {
            rows.push(r.to_vec());
            row_labels.push(t.label);
            row_trials.push(t.trial_index);
        }
    }
    let complete = QualityLabel::ALL.iter().all(|l| row_labels.contains(l));
    Ok(PatternMatrix {
        rows: Matrix::from_rows(&rows),
        row_ids: (1..=row_labels.len()).collect(),
        row_labels,
        row_trials,
        sensor_names: first.sensor_names.clone(),
        complete,
    })
}

/// Splits trials into replications: the r-th replication holds the r-th
/// trial (by trial index) of every class present.
pub fn replications(trials: &[TrialCapture]) -> Result<Vec<Vec<TrialCapture>>, DataError> {
    if trials.is_empty() {
        return Err(DataError::Empty);
    }
    let mut per_class: BTreeMap<QualityLabel, Vec<&TrialCapture>> = BTreeMap::new();
    for t in trials {
        per_class.entry(t.label).or_default().push(t);
    }
    for v in per_class.values_mut() {
        v.sort_by_key(|t| t.trial_index);
    }
    let count = per_class.values().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(count);
    for r in 0..count {
        let mut rep = Vec::new();
        for label in QualityLabel::ALL {
            match per_class.get(&label) {
                Some(v) if r < v.len() => rep.push(v[r].clone()),
                Some(_) => return Err(DataError::MissingClass(label)),
                None => {}
            }
        }
        out.push(rep);
    }
    Ok(out)
}
