//! End-to-end orchestration: parse, reduce, normalize, decompose, cluster
//! and write every report and plot into an output directory.
//!
//! Artifacts per replication:
//!
//! | file | content |
//! |------|---------|
//! | `normalized.csv` | normalized pattern matrix, input layout plus `# method=` line |
//! | `templates.csv` | per-class template grid |
//! | `stddev.csv` | per-sensor deviation, one row |
//! | `prune.json` | sensor pruning decision |
//! | `eigen.json` | eigenvalues, eigenvectors (column-major), variance explained |
//! | `scores.csv` | PC scores with true label and assigned cluster |
//! | `pareto.svg`, `scatter.svg` | plots |
//! | `distribution.json`, `distribution.txt` | cluster distribution report |
//!
//! With a single replication the files go straight into the output
//! directory; otherwise into `rep-1/`, `rep-2/`, ...

use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{
    assign_clusters, class_centroids, distribution_report, prune_sensors, write_distribution_table, Centroids,
    Cluster, ClusterAssignment, ClusterError, DistributionReport, OutlierRule, SensorPruneDecision,
};
use crate::datamodel::{
    build_pattern_matrix, parse_dataset, replications, write_dataset, DataError, PatternMatrix, QualityLabel,
    ReduceMethod, SamplingSpec, TrialCapture,
};
use crate::linalg::Matrix;
use crate::normalize::{
    class_templates, column_id, fft_normalize, power_average_normalize, write_normalized, write_templates,
    ClassTemplate, FftAxis, NormalizationMethod, NormalizeError, NormalizedMatrix,
};
use crate::pca::{
    center_columns, covariance, eigen_symmetric, per_sensor_stddev, project, variance_explained, write_stddev,
    EigenReport, EigenSpectrum, PcaError, ProjectedData,
};
use crate::plot::{render_pareto, render_scatter, PlotError};
use crate::synthgen::{generate_dataset, ScenarioSpec, SynthError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {reason}")]
    BadArtifact { path: PathBuf, reason: String },
}

impl PipelineError {
    /// 2 for input or configuration problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Pca(
                PcaError::NoConvergence { .. } | PcaError::ZeroVariance | PcaError::NotSymmetric { .. } | PcaError::NonFinite,
            ) => 3,
            _ => 2,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub normalization: NormalizationMethod,
    pub components_k: usize,
    pub center: bool,
    pub outlier_multiplier: f64,
    pub prune_ratio: f64,
    pub reduce: ReduceMethod,
    /// 1-based sensor numbers removed before anything else.
    pub drop_sensors: Vec<usize>,
    pub sampling: SamplingSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            normalization: NormalizationMethod::Fft,
            components_k: 2,
            center: true,
            outlier_multiplier: 2.0,
            prune_ratio: 2.0,
            reduce: ReduceMethod::BlockMean,
            drop_sensors: Vec::new(),
            sampling: SamplingSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.components_k == 0 {
            return Err(PipelineError::Config("components must be at least 1".into()));
        }
        if self.outlier_multiplier.is_nan() || self.outlier_multiplier <= 0.0 {
            return Err(PipelineError::Config("outlier multiplier must be positive".into()));
        }
        if self.prune_ratio.is_nan() || self.prune_ratio <= 1.0 {
            return Err(PipelineError::Config("prune ratio must be greater than 1".into()));
        }
        if self.drop_sensors.contains(&0) {
            return Err(PipelineError::Config("sensor numbers are 1-based".into()));
        }
        self.sampling.validate()?;
        Ok(())
    }
}

/// Everything computed for one replication.
#[derive(Debug, Clone)]
pub struct ReplicationResult {
    pub pattern: PatternMatrix,
    pub normalized: NormalizedMatrix,
    pub templates: Vec<ClassTemplate>,
    pub stddev: Vec<f64>,
    pub prune: SensorPruneDecision,
    pub column_means: Vec<f64>,
    pub spectrum: EigenSpectrum,
    /// Scores on `components_k` axes, used for clustering.
    pub projected: ProjectedData,
    /// Scores on at least two axes, used for plotting and `scores.csv`.
    pub plot_scores: Matrix,
    pub variance_explained: Vec<f64>,
    pub centroids: Centroids,
    pub assignments: Vec<ClusterAssignment>,
    pub report: DistributionReport,
}

/// Runs the analysis on one replication (one trial per class).
pub fn analyze_replication(trials: &[TrialCapture], config: &PipelineConfig) -> Result<ReplicationResult, PipelineError> {
    config.validate()?;
    let drop: Vec<usize> = config.drop_sensors.iter().map(|s| s - 1).collect();
    let trials: Vec<TrialCapture> = trials
        .iter()
        .map(|t| t.without_sensors(&drop))
        .collect::<Result<_, _>>()?;
    let pattern = build_pattern_matrix(&trials, &config.sampling, config.reduce)?;
    pattern.require_complete()?;

    let normalized = match config.normalization {
        NormalizationMethod::PowerAverage => power_average_normalize(&pattern),
        NormalizationMethod::Fft => fft_normalize(&pattern, FftAxis::PerSensorColumn),
    };
    let templates = class_templates(&normalized)?;
    let stddev = per_sensor_stddev(&normalized.values)?;
    let prune = prune_sensors(&stddev, config.prune_ratio);

    let (data, column_means) = if config.center {
        center_columns(&normalized.values)?
    } else {
        (normalized.values.clone(), vec![0.0; normalized.values.ncols()])
    };
    let spectrum = eigen_symmetric(&covariance(&data, config.center)?)?;
    let projected = project(&data, &spectrum, config.components_k)?;
    let n = spectrum.eigenvalues.len();
    let plot_k = config.components_k.max(2).min(n);
    let plot_scores = project(&data, &spectrum, plot_k)?.scores;
    let variance_explained = variance_explained(&spectrum.eigenvalues)?;

    let labels = normalized.labels();
    let centroids = class_centroids(&projected.scores, labels)?;
    let assignments = assign_clusters(
        &projected.scores,
        labels,
        &pattern.row_ids,
        &centroids,
        OutlierRule::with_multiplier(config.outlier_multiplier),
    )?;
    let report = distribution_report(&assignments)?;
    Ok(ReplicationResult {
        pattern,
        normalized,
        templates,
        stddev,
        prune,
        column_means,
        spectrum,
        projected,
        plot_scores,
        variance_explained,
        centroids,
        assignments,
        report,
    })
}

/// Runs every replication found in `trials`.
pub fn analyze(trials: &[TrialCapture], config: &PipelineConfig) -> Result<Vec<ReplicationResult>, PipelineError> {
    replications(trials)?
        .iter()
        .map(|rep| analyze_replication(rep, config))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PruneArtifact<'a> {
    sensor_columns: Vec<String>,
    sensor_names: Vec<String>,
    #[serde(flatten)]
    decision: std::borrow::Cow<'a, SensorPruneDecision>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionArtifact {
    pub normalization: NormalizationMethod,
    #[serde(flatten)]
    pub report: DistributionReport,
    pub assignments: Vec<ClusterAssignment>,
}

/// Centroids of the first two score columns.
fn plot_centroids(scores: &Matrix, labels: &[QualityLabel]) -> Result<Centroids, ClusterError> {
    let two = scores.select_columns(&[0, 1]);
    class_centroids(&two, labels)
}

fn scores_csv(r: &ReplicationResult) -> String {
    let k = r.plot_scores.ncols();
    let mut out = String::from("row_id,label,trial,assigned,distance");
    for i in 1..=k {
        out.push_str(&format!(",pc{i}"));
    }
    out.push('\n');
    for (i, a) in r.assignments.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}",
            a.row_id, a.true_label, r.pattern.row_trials[i], a.assigned, a.distance
        ));
        for v in r.plot_scores.row(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

/// Named artifact files for one replication, in write order.
pub fn render_artifacts(r: &ReplicationResult, config: &PipelineConfig) -> Result<Vec<(&'static str, Vec<u8>)>, PipelineError> {
    let columns: Vec<String> = r.pattern.sensor_names.iter().map(|s| column_id(s)).collect();
    let mut out: Vec<(&'static str, Vec<u8>)> = Vec::new();

    let mut buf = Vec::new();
    write_normalized(&mut buf, &r.normalized).expect("write to vec");
    out.push(("normalized.csv", buf));

    let mut buf = Vec::new();
    write_templates(&mut buf, &r.templates, &r.pattern.sensor_names).expect("write to vec");
    out.push(("templates.csv", buf));

    let mut buf = Vec::new();
    write_stddev(&mut buf, &columns, &r.stddev).expect("write to vec");
    out.push(("stddev.csv", buf));

    out.push((
        "prune.json",
        json(&PruneArtifact {
            sensor_columns: columns.clone(),
            sensor_names: r.pattern.sensor_names.clone(),
            decision: std::borrow::Cow::Borrowed(&r.prune),
        }),
    ));
    out.push(("eigen.json", json(&EigenReport::new(&r.spectrum, &r.column_means, config.center)?)));
    out.push(("scores.csv", scores_csv(r).into_bytes()));
    out.push(("pareto.svg", render_pareto(&r.variance_explained).into_bytes()));

    let centroids = plot_centroids(&r.plot_scores, r.normalized.labels())?;
    let scatter = render_scatter(&r.plot_scores, &r.variance_explained, &r.assignments, &centroids)?;
    out.push(("scatter.svg", scatter.into_bytes()));

    out.push((
        "distribution.json",
        json(&DistributionArtifact {
            normalization: config.normalization,
            report: r.report.clone(),
            assignments: r.assignments.clone(),
        }),
    ));
    let mut buf = Vec::new();
    write_distribution_table(&mut buf, &r.report).expect("write to vec");
    out.push(("distribution.txt", buf));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub dir: PathBuf,
    pub total_misassigned_percent: f64,
    pub variance_explained: Vec<f64>,
    pub removed_sensors: Vec<usize>,
}

fn read_trials(input: &Path, sampling: &SamplingSpec) -> Result<Vec<TrialCapture>, PipelineError> {
    let file = fs::File::open(input).map_err(|e| PipelineError::io(input, e))?;
    Ok(parse_dataset(io::BufReader::new(file), sampling)?)
}

fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
    }
    Ok(())
}

/// Reads `input`, analyzes every replication and writes the artifacts.
/// Nothing is written unless every replication succeeds.
pub fn run(config: &PipelineConfig, input: &Path, output_dir: &Path) -> Result<Vec<ReplicationSummary>, PipelineError> {
    config.validate()?;
    let trials = read_trials(input, &config.sampling)?;
    let results = analyze(&trials, config)?;
    let mut staged = Vec::with_capacity(results.len());
    for (i, r) in results.iter().enumerate() {
        let dir = if results.len() == 1 {
            output_dir.to_path_buf()
        } else {
            output_dir.join(format!("rep-{}", i + 1))
        };
        staged.push((dir, render_artifacts(r, config)?, r));
    }
    let mut summaries = Vec::new();
    for (dir, files, r) in staged {
        write_all(&dir, &files)?;
        summaries.push(ReplicationSummary {
            dir,
            total_misassigned_percent: r.report.total_misassigned_percent,
            variance_explained: r.variance_explained.clone(),
            removed_sensors: r.prune.removed_sensors.clone(),
        });
    }
    Ok(summaries)
}

/// Generates a dataset from a scenario and writes it as capture CSV.
/// Returns the number of trials written and of clamped samples.
pub fn simulate(scenario: &ScenarioSpec, out_path: &Path) -> Result<(usize, usize), PipelineError> {
    let (trials, clamped) = generate_dataset(scenario)?;
    let mut buf = Vec::new();
    write_dataset(&mut buf, &trials)?;
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    fs::write(out_path, buf).map_err(|e| PipelineError::io(out_path, e))?;
    Ok((trials.len(), clamped))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(ScenarioSpec::from_json(&text)?)
}

/// Rebuilds `pareto.svg` and `scatter.svg` from a run's `eigen.json` and
/// `scores.csv`.
pub fn render_from_artifacts(from_dir: &Path, output_dir: &Path) -> Result<(), PipelineError> {
    let eigen_path = from_dir.join("eigen.json");
    let text = fs::read_to_string(&eigen_path).map_err(|e| PipelineError::io(&eigen_path, e))?;
    let eigen: EigenReport = serde_json::from_str(&text).map_err(|e| PipelineError::BadArtifact {
        path: eigen_path.clone(),
        reason: e.to_string(),
    })?;

    let scores_path = from_dir.join("scores.csv");
    let file = fs::File::open(&scores_path).map_err(|e| PipelineError::io(&scores_path, e))?;
    let bad = |reason: String| PipelineError::BadArtifact {
        path: scores_path.clone(),
        reason,
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut assignments = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(&scores_path, e))?;
        if i == 0 {
            if !line.starts_with("row_id,label,trial,assigned,distance") {
                return Err(bad("unexpected header".into()));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 7 {
            return Err(bad(format!("line {}: expected at least two score columns", i + 1)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("line {}: bad number {s:?}", i + 1)));
        let true_label: QualityLabel = fields[1].parse()?;
        let assigned: Cluster = fields[3].parse().map_err(bad)?;
        assignments.push(ClusterAssignment {
            row_id: fields[0].parse().map_err(|_| bad(format!("line {}: bad row id", i + 1)))?,
            true_label,
            assigned,
            distance: num(fields[4])?,
        });
        labels.push(true_label);
        rows.push(fields[5..].iter().map(|s| num(s)).collect::<Result<Vec<f64>, _>>()?);
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(bad("ragged score rows".into()));
    }
    let scores = Matrix::from_rows(&rows);
    let centroids = plot_centroids(&scores, &labels)?;
    let files = vec![
        ("pareto.svg", render_pareto(&eigen.variance_explained).into_bytes()),
        (
            "scatter.svg",
            render_scatter(&scores, &eigen.variance_explained, &assignments, &centroids)?.into_bytes(),
        ),
    ];
    write_all(output_dir, &files)
}
