//! Amplitude (power-average) and frequency (FFT magnitude) normalization of
//! pattern matrices, and per-class templates.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{PatternMatrix, QualityLabel, CANONICAL_SENSORS};
use crate::linalg::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum NormalizeError {
    #[error("class {0} has no rows")]
    EmptyClass(QualityLabel),
    #[error("normalized matrix has no rows")]
    Empty,
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMethod {
    PowerAverage,
    Fft,
}

impl NormalizationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            NormalizationMethod::PowerAverage => "power-average",
            NormalizationMethod::Fft => "fft",
        }
    }
}

/// Axis along which the FFT runs. Only the time axis of each sensor column,
/// within each class block, is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FftAxis {
    #[default]
    PerSensorColumn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix {
    pub values: Matrix,
    pub method: NormalizationMethod,
    pub source: PatternMatrix,
    /// 0-based rows that were all zero and passed through unchanged.
    pub zero_rows: Vec<usize>,
}

impl NormalizedMatrix {
    pub fn labels(&self) -> &[QualityLabel] {
        &self.source.row_labels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub label: QualityLabel,
    pub vector: Vec<f64>,
}

/// Divides every row by its largest absolute entry. All-zero rows are left
/// as they are and recorded in `zero_rows`.
pub fn power_average_normalize(a: &PatternMatrix) -> NormalizedMatrix {
    let mut values = a.rows.clone();
    let mut zero_rows = Vec::new();
    for i in 0..values.nrows() {
        let row = values.row_mut(i);
        let peak = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            zero_rows.push(i);
            continue;
        }
        row.iter_mut().for_each(|v| *v /= peak);
    }
    NormalizedMatrix {
        values,
        method: NormalizationMethod::PowerAverage,
        source: a.clone(),
        zero_rows,
    }
}

/// Magnitude spectrum by direct O(L²) summation.
pub fn dft_magnitude(v: &[f64]) -> Vec<f64> {
    let len = v.len();
    (0..len)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &x) in v.iter().enumerate() {
                // reduce jk mod L first so the angle stays small
                let angle = -2.0 * PI * ((j * k) % len) as f64 / len as f64;
                re += x * angle.cos();
                im += x * angle.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// Magnitude spectrum. Radix-2 for power-of-two lengths, direct DFT otherwise.
pub fn fft_magnitude(v: &[f64]) -> Vec<f64> {
    let len = v.len();
    if len < 2 || !len.is_power_of_two() {
        return dft_magnitude(v);
    }
    let mut re = v.to_vec();
    let mut im = vec![0.0; len];
    fft_radix2_in_place(&mut re, &mut im);
    re.iter().zip(&im).map(|(r, i)| r.hypot(*i)).collect()
}

/// Iterative decimation-in-time Cooley-Tukey. `re.len()` must be a power of two.
fn fft_radix2_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut half = 1;
    while half < n {
        let step = half * 2;
        for k in 0..half {
            let angle = -PI * k as f64 / half as f64;
            let (wr, wi) = (angle.cos(), angle.sin());
            for start in (0..n).step_by(step) {
                let (a, b) = (start + k, start + k + half);
                let tr = re[b] * wr - im[b] * wi;
                let ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        half = step;
    }
}

/// Replaces each sensor's time series inside every class block with its
/// magnitude spectrum. Row `k` of a block becomes frequency bin `k`.
pub fn fft_normalize(a: &PatternMatrix, axis: FftAxis) -> NormalizedMatrix {
    let FftAxis::PerSensorColumn = axis;
    let mut values = a.rows.clone();
    for (_, range) in a.class_blocks() {
        for c in 0..values.ncols() {
            let series: Vec<f64> = range.clone().map(|r| a.rows[(r, c)]).collect();
            for (r, mag) in range.clone().zip(fft_magnitude(&series)) {
                values[(r, c)] = mag;
            }
        }
    }
    NormalizedMatrix {
        values,
        method: NormalizationMethod::Fft,
        source: a.clone(),
        zero_rows: Vec::new(),
    }
}

/// Column-wise mean of each present class's rows, in KW1..KW3 order.
pub fn class_templates(n: &NormalizedMatrix) -> Result<Vec<ClassTemplate>, NormalizeError> {
    if n.values.nrows() == 0 {
        return Err(NormalizeError::Empty);
    }
    let cols = n.values.ncols();
    let mut out = Vec::new();
    for label in QualityLabel::ALL {
        let rows: Vec<&[f64]> = n
            .values
            .rows_iter()
            .zip(n.labels())
            .filter(|(_, l)| **l == label)
            .map(|(r, _)| r)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let mut vector = vec![0.0; cols];
        for r in &rows {
            for (acc, v) in vector.iter_mut().zip(r.iter()) {
                *acc += v;
            }
        }
        vector.iter_mut().for_each(|v| *v /= rows.len() as f64);
        out.push(ClassTemplate { label, vector });
    }
    Ok(out)
}

/// `s<k>` column id for a sensor name under the canonical map.
pub fn column_id(name: &str) -> String {
    CANONICAL_SENSORS
        .iter()
        .position(|s| *s == name)
        .map(|i| format!("s{}", i + 1))
        .unwrap_or_else(|| name.to_string())
}

/// Template grid: one row per class, one column per sensor.
pub fn write_templates<W: Write>(mut sink: W, templates: &[ClassTemplate], sensor_names: &[String]) -> std::io::Result<()> {
    let cols: Vec<String> = sensor_names.iter().map(|s| column_id(s)).collect();
    writeln!(sink, "quality,{}", cols.join(","))?;
    for t in templates {
        let vals: Vec<String> = t.vector.iter().map(|v| format!("{v:.6e}")).collect();
        writeln!(sink, "{},{}", t.label, vals.join(","))?;
    }
    Ok(())
}

/// Normalized matrix in the input CSV layout, preceded by a `# method=` line.
/// For FFT output `sample_index` is the frequency bin.
pub fn write_normalized<W: Write>(mut sink: W, n: &NormalizedMatrix) -> std::io::Result<()> {
    writeln!(sink, "# method={}", n.method.as_str())?;
    let cols: Vec<String> = n.source.sensor_names.iter().map(|s| column_id(s)).collect();
    writeln!(sink, "label,trial,sample_index,{}", cols.join(","))?;
    for (label, range) in n.source.class_blocks() {
        for (k, r) in range.enumerate() {
            let vals: Vec<String> = n.values.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(sink, "{},{},{},{}", label, n.source.row_trials[r], k, vals.join(","))?;
        }
    }
    Ok(())
}
