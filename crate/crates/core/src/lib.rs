//! Electronic-nose quality classification.
//!
//! Multi-sensor ADC captures are reduced along time, normalized either by
//! per-row maximum (power average) or by FFT magnitude, decomposed with a
//! Jacobi-based PCA and clustered by nearest class centroid in the leading
//! principal components. Rows far from every centroid form a separate
//! "new cluster". The [`pipeline`] module ties the stages together and
//! writes tables and SVG plots.

pub mod cluster;
pub mod datamodel;
pub mod linalg;
pub mod normalize;
pub mod pca;
pub mod pipeline;
pub mod plot;
pub mod synthgen;

pub use cluster::{Cluster, ClusterAssignment, DistributionReport, OutlierRule, SensorPruneDecision};
pub use datamodel::{PatternMatrix, QualityLabel, ReduceMethod, SamplingSpec, TrialCapture};
pub use linalg::Matrix;
pub use normalize::{NormalizationMethod, NormalizedMatrix};
pub use pca::{EigenSpectrum, ProjectedData};
pub use pipeline::{PipelineConfig, PipelineError};
pub use synthgen::{ScenarioSpec, SensorModel};
