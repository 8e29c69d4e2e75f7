//! Principal component analysis: centering, sample covariance, Jacobi
//! eigendecomposition, projection and per-sensor deviation.

mod jacobi;

pub use jacobi::{eigen_symmetric, eigen_symmetric_matrix, MAX_SWEEPS, OFF_DIAGONAL_TOL};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{mean, sample_stddev, Matrix};

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("matrix is not symmetric: |S[{row}][{col}] - S[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("matrix must be square and non-empty, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (max off-diagonal {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("component count {k} must be in 1..={n}")]
    BadComponentCount { k: usize, n: usize },
    #[error("total variance is zero; variance explained is undefined")]
    ZeroVariance,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub values: Matrix,
    pub centered: bool,
    /// Always `m - 1`.
    pub divisor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: Matrix,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedData {
    pub scores: Matrix,
    pub variance_explained: Vec<f64>,
}

/// JSON form of an [`EigenSpectrum`]; eigenvectors are stored column-major
/// (one inner list per eigenvector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub variance_explained: Vec<f64>,
    pub column_means: Vec<f64>,
    pub centered: bool,
    pub sweeps: usize,
}

impl EigenReport {
    pub fn new(e: &EigenSpectrum, column_means: &[f64], centered: bool) -> Result<Self, PcaError> {
        Ok(Self {
            eigenvalues: e.eigenvalues.clone(),
            eigenvectors: (0..e.eigenvectors.ncols()).map(|c| e.eigenvectors.column(c)).collect(),
            variance_explained: variance_explained(&e.eigenvalues)?,
            column_means: column_means.to_vec(),
            centered,
            sweeps: e.sweeps,
        })
    }
}

/// Subtracts each column's mean. Returns the centered matrix and the means.
pub fn center_columns(values: &Matrix) -> Result<(Matrix, Vec<f64>), PcaError> {
    let m = values.nrows();
    if m < 2 {
        return Err(PcaError::TooFewRows(m));
    }
    let means: Vec<f64> = (0..values.ncols()).map(|c| mean(&values.column(c))).collect();
    let centered = Matrix::from_fn(m, values.ncols(), |r, c| values[(r, c)] - means[c]);
    Ok((centered, means))
}

/// Sample covariance `XᵀX / (m - 1)` of an already centered matrix.
///
/// With `centered = false` the same product is taken over the raw rows.
pub fn covariance(data: &Matrix, centered: bool) -> Result<CovarianceMatrix, PcaError> {
    let (m, n) = data.shape();
    if m < 2 {
        return Err(PcaError::TooFewRows(m));
    }
    let divisor = (m - 1) as f64;
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = data.rows_iter().map(|r| r[i] * r[j]).sum::<f64>() / divisor;
            values[(i, j)] = s;
            values[(j, i)] = s;
        }
    }
    Ok(CovarianceMatrix {
        values,
        centered,
        divisor,
    })
}

/// Fraction of the total variance carried by each eigenvalue. Negative
/// round-off eigenvalues count as zero.
pub fn variance_explained(eigenvalues: &[f64]) -> Result<Vec<f64>, PcaError> {
    let clamped: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(PcaError::ZeroVariance);
    }
    Ok(clamped.iter().map(|l| l / total).collect())
}

/// Scores on the first `k` principal axes.
pub fn project(centered: &Matrix, e: &EigenSpectrum, k: usize) -> Result<ProjectedData, PcaError> {
    let n = e.eigenvalues.len();
    if k == 0 || k > n {
        return Err(PcaError::BadComponentCount { k, n });
    }
    if centered.ncols() != n {
        return Err(PcaError::Shape(format!(
            "data has {} columns, spectrum has {n}",
            centered.ncols()
        )));
    }
    let axes = e.eigenvectors.select_columns(&(0..k).collect::<Vec<_>>());
    let mut variance = variance_explained(&e.eigenvalues)?;
    variance.truncate(k);
    Ok(ProjectedData {
        scores: centered.matmul(&axes),
        variance_explained: variance,
    })
}

/// Sample standard deviation of each column.
pub fn per_sensor_stddev(values: &Matrix) -> Result<Vec<f64>, PcaError> {
    if values.nrows() < 2 {
        return Err(PcaError::TooFewRows(values.nrows()));
    }
    Ok((0..values.ncols()).map(|c| sample_stddev(&values.column(c))).collect())
}

/// Single-row CSV: sensor columns, one deviation each.
pub fn write_stddev<W: std::io::Write>(mut sink: W, columns: &[String], stddev: &[f64]) -> std::io::Result<()> {
    writeln!(sink, "{}", columns.join(","))?;
    let vals: Vec<String> = stddev.iter().map(|v| format!("{v:.6}")).collect();
    writeln!(sink, "{}", vals.join(","))
}
