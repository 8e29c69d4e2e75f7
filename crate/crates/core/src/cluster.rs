//! Nearest-centroid cluster assignment in principal-component space,
//! new-cluster (outlier) detection, distribution reports and
//! deviation-based sensor pruning.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::QualityLabel;
use crate::linalg::{euclidean, mean, sample_stddev, Matrix};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("class {0} has no rows")]
    EmptyClass(QualityLabel),
    #[error("no centroid for class {0}")]
    MissingCentroid(QualityLabel),
    #[error("row {0} appears more than once")]
    DuplicateRow(usize),
    #[error("{scores} score rows but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("outlier multiplier must be positive, got {0}")]
    BadMultiplier(f64),
}

/// Cluster a row ends up in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cluster {
    KW1,
    KW2,
    KW3,
    NewCluster,
}

impl Cluster {
    pub fn label(self) -> Option<QualityLabel> {
        match self {
            Cluster::KW1 => Some(QualityLabel::KW1),
            Cluster::KW2 => Some(QualityLabel::KW2),
            Cluster::KW3 => Some(QualityLabel::KW3),
            Cluster::NewCluster => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cluster::KW1 => "KW1",
            Cluster::KW2 => "KW2",
            Cluster::KW3 => "KW3",
            Cluster::NewCluster => "NewCluster",
        }
    }
}

impl From<QualityLabel> for Cluster {
    fn from(l: QualityLabel) -> Self {
        match l {
            QualityLabel::KW1 => Cluster::KW1,
            QualityLabel::KW2 => Cluster::KW2,
            QualityLabel::KW3 => Cluster::KW3,
        }
    }
}

impl fmt::Display for Cluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Cluster {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "KW1" => Ok(Cluster::KW1),
            "KW2" => Ok(Cluster::KW2),
            "KW3" => Ok(Cluster::KW3),
            "NewCluster" => Ok(Cluster::NewCluster),
            other => Err(format!("unknown cluster {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub row_id: usize,
    pub true_label: QualityLabel,
    pub assigned: Cluster,
    /// Distance to the nearest class centroid, in score units.
    pub distance: f64,
}

pub type Centroids = BTreeMap<QualityLabel, Vec<f64>>;

/// Mean score row of every class. All three classes must be present.
pub fn class_centroids(scores: &Matrix, labels: &[QualityLabel]) -> Result<Centroids, ClusterError> {
    if scores.nrows() != labels.len() {
        return Err(ClusterError::LengthMismatch {
            scores: scores.nrows(),
            labels: labels.len(),
        });
    }
    let mut out = Centroids::new();
    for label in QualityLabel::ALL {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if rows.is_empty() {
            return Err(ClusterError::EmptyClass(label));
        }
        let centroid = (0..scores.ncols())
            .map(|c| mean(&rows.iter().map(|&r| scores[(r, c)]).collect::<Vec<_>>()))
            .collect();
        out.insert(label, centroid);
    }
    Ok(out)
}

/// Rule that sends a row to the new cluster.
///
/// A row is an outlier when its nearest-centroid distance exceeds both
/// `mean + multiplier * stddev` of all nearest-centroid distances and
/// `separation_fraction` times the smallest distance between two centroids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierRule {
    pub multiplier: f64,
    pub separation_fraction: f64,
}

impl Default for OutlierRule {
    fn default() -> Self {
        Self {
            multiplier: 2.0,
            separation_fraction: 0.5,
        }
    }
}

impl OutlierRule {
    pub fn with_multiplier(multiplier: f64) -> Self {
        Self {
            multiplier,
            ..Self::default()
        }
    }
}

/// Assigns every score row to its nearest class centroid (ties go to the
/// lower class), then moves distance outliers to [`Cluster::NewCluster`].
pub fn assign_clusters(
    scores: &Matrix,
    labels: &[QualityLabel],
    row_ids: &[usize],
    centroids: &Centroids,
    rule: OutlierRule,
) -> Result<Vec<ClusterAssignment>, ClusterError> {
    if scores.nrows() != labels.len() || row_ids.len() != labels.len() {
        return Err(ClusterError::LengthMismatch {
            scores: scores.nrows(),
            labels: labels.len(),
        });
    }
    if rule.multiplier.is_nan() || rule.multiplier <= 0.0 {
        return Err(ClusterError::BadMultiplier(rule.multiplier));
    }
    let mut ordered = Vec::with_capacity(3);
    for label in QualityLabel::ALL {
        let c = centroids.get(&label).ok_or(ClusterError::MissingCentroid(label))?;
        ordered.push((label, c.as_slice()));
    }

    let mut out: Vec<ClusterAssignment> = scores
        .rows_iter()
        .zip(labels)
        .zip(row_ids)
        .map(|((row, &true_label), &row_id)| {
            let (label, distance) = ordered
                .iter()
                .map(|(l, c)| (*l, euclidean(row, c)))
                .fold(None, |best: Option<(QualityLabel, f64)>, cand| match best {
                    Some(b) if b.1 <= cand.1 => Some(b),
                    _ => Some(cand),
                })
                .expect("three centroids");
            ClusterAssignment {
                row_id,
                true_label,
                assigned: label.into(),
                distance,
            }
        })
        .collect();

    if out.len() >= 2 {
        let distances: Vec<f64> = out.iter().map(|a| a.distance).collect();
        let statistical = mean(&distances) + rule.multiplier * sample_stddev(&distances);
        let mut min_sep = f64::INFINITY;
        for i in 0..ordered.len() {
            for j in i + 1..ordered.len() {
                min_sep = min_sep.min(euclidean(ordered[i].1, ordered[j].1));
            }
        }
        let limit = statistical.max(rule.separation_fraction * min_sep);
        for a in out.iter_mut().filter(|a| a.distance > limit) {
            a.assigned = Cluster::NewCluster;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    /// Rows whose assigned cluster is this class, ascending.
    pub member_row_ids: Vec<usize>,
    /// Rows with this true label.
    pub total_rows: usize,
    /// Rows with this true label that landed anywhere else.
    pub misassigned_rows: usize,
    pub misassigned_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub per_class: BTreeMap<QualityLabel, ClassDistribution>,
    pub new_cluster_rows: Vec<usize>,
    pub total_rows: usize,
    pub total_misassigned_percent: f64,
}

/// Counts membership and misassignment per true class.
pub fn distribution_report(assignments: &[ClusterAssignment]) -> Result<DistributionReport, ClusterError> {
    let mut seen = std::collections::BTreeSet::new();
    for a in assignments {
        if !seen.insert(a.row_id) {
            return Err(ClusterError::DuplicateRow(a.row_id));
        }
    }
    let mut per_class = BTreeMap::new();
    let mut misassigned_total = 0;
    for label in QualityLabel::ALL {
        let total_rows = assignments.iter().filter(|a| a.true_label == label).count();
        if total_rows == 0 {
            continue;
        }
        let misassigned_rows = assignments
            .iter()
            .filter(|a| a.true_label == label && a.assigned != label.into())
            .count();
        misassigned_total += misassigned_rows;
        let mut member_row_ids: Vec<usize> = assignments
            .iter()
            .filter(|a| a.assigned == label.into())
            .map(|a| a.row_id)
            .collect();
        member_row_ids.sort_unstable();
        per_class.insert(
            label,
            ClassDistribution {
                member_row_ids,
                total_rows,
                misassigned_rows,
                misassigned_percent: 100.0 * misassigned_rows as f64 / total_rows as f64,
            },
        );
    }
    let mut new_cluster_rows: Vec<usize> = assignments
        .iter()
        .filter(|a| a.assigned == Cluster::NewCluster)
        .map(|a| a.row_id)
        .collect();
    new_cluster_rows.sort_unstable();
    let total_rows = assignments.len();
    Ok(DistributionReport {
        per_class,
        new_cluster_rows,
        total_rows,
        total_misassigned_percent: if total_rows == 0 {
            0.0
        } else {
            100.0 * misassigned_total as f64 / total_rows as f64
        },
    })
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Plain-text report: members per cluster, then misassignment per class.
pub fn write_distribution_table<W: Write>(mut sink: W, report: &DistributionReport) -> std::io::Result<()> {
    writeln!(sink, "Quality | Rows")?;
    for (label, d) in &report.per_class {
        writeln!(sink, "{label} | {}", join_ids(&d.member_row_ids))?;
    }
    writeln!(sink, "New Cluster | {}", join_ids(&report.new_cluster_rows))?;
    writeln!(sink)?;
    writeln!(sink, "Quality | Misassigned %")?;
    for (label, d) in &report.per_class {
        writeln!(sink, "{label} | {:.2}", d.misassigned_percent)?;
    }
    writeln!(sink, "Total | {:.2}", report.total_misassigned_percent)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPruneDecision {
    pub stddevs: Vec<f64>,
    /// 0-based positions, in removal order.
    pub removed_indices: Vec<usize>,
    /// 1-based sensor numbers, ascending.
    pub removed_sensors: Vec<usize>,
    /// 1-based sensor with the highest deviation (first on ties).
    pub highest_sensor: usize,
    /// 1-based sensor with the lowest deviation (first on ties).
    pub lowest_sensor: usize,
    pub ratio_threshold: f64,
    pub rule: String,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Greedy ratio rule: repeatedly take the remaining sensor with the largest
/// deviation and drop it if it exceeds `ratio_threshold` times the median of
/// the other remaining sensors. Stops at the first sensor that survives, or
/// when one sensor is left.
pub fn prune_sensors(stddevs: &[f64], ratio_threshold: f64) -> SensorPruneDecision {
    let first_by = |better: fn(f64, f64) -> bool| {
        stddevs
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
                Some(b) if !better(v, b.1) => Some(b),
                _ => Some((i, v)),
            })
            .map_or(0, |b| b.0 + 1)
    };
    let mut remaining: Vec<usize> = (0..stddevs.len()).collect();
    let mut removed = Vec::new();
    while remaining.len() >= 2 {
        let (pos, &cand) = remaining
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, &usize)>, (p, i)| match best {
                Some(b) if stddevs[*i] <= stddevs[*b.1] => Some(b),
                _ => Some((p, i)),
            })
            .expect("non-empty");
        let mut others: Vec<f64> = remaining.iter().filter(|&&i| i != cand).map(|&i| stddevs[i]).collect();
        others.sort_by(f64::total_cmp);
        if stddevs[cand] > ratio_threshold * median(&others) {
            removed.push(cand);
            remaining.remove(pos);
        } else {
            break;
        }
    }
    let mut removed_sensors: Vec<usize> = removed.iter().map(|i| i + 1).collect();
    removed_sensors.sort_unstable();
    SensorPruneDecision {
        stddevs: stddevs.to_vec(),
        removed_indices: removed,
        removed_sensors,
        highest_sensor: first_by(|v, b| v > b),
        lowest_sensor: first_by(|v, b| v < b),
        ratio_threshold,
        rule: format!(
            "remove the sensor with the largest deviation while it exceeds {ratio_threshold} x median(deviation of the other remaining sensors)"
        ),
    }
}
