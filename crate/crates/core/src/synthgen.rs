//! Parametric metal-oxide sensor responses for desk-scale datasets.
//!
//! Each sensor follows an exponential rise towards `baseline + amplitude`
//! until `peak_time`, then an exponential decay back to `baseline`.
//! Samples are taken at `t_j = j / sample_rate_hz`.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). Every
//! `(seed, label, trial, sensor)` tuple gets its own stream, keyed by a
//! SplitMix64 mix of the four values, so a trial is a pure function of the
//! scenario and its coordinates. Per stream, the gain-drift factor is drawn
//! first (uniform in `[1 - gain_drift, 1 + gain_drift]`, scaling the
//! amplitude), then one Gaussian noise term per sample.
//!
//! The bundled scenario parameters are made up for testing; they are not
//! measured sensor characteristics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{sensor_name, QualityLabel, SamplingSpec, TrialCapture};
use crate::linalg::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("scenario has no models for class {0}")]
    UnknownLabel(QualityLabel),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub baseline: f64,
    pub amplitude: f64,
    pub rise_tau: f64,
    pub decay_tau: f64,
    pub peak_time: f64,
    pub noise_sigma: f64,
}

impl SensorModel {
    fn validate(&self) -> Result<(), String> {
        let finite = [
            self.baseline,
            self.amplitude,
            self.rise_tau,
            self.decay_tau,
            self.peak_time,
            self.noise_sigma,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err("model fields must be finite".into());
        }
        if !(self.rise_tau > 0.0 && self.decay_tau > 0.0) {
            return Err("rise_tau and decay_tau must be positive".into());
        }
        if self.noise_sigma < 0.0 || self.baseline < 0.0 || self.peak_time < 0.0 {
            return Err("noise_sigma, baseline and peak_time must be >= 0".into());
        }
        Ok(())
    }
}

/// Noiseless response at time `t` (seconds).
pub fn response_curve(m: &SensorModel, t: f64) -> f64 {
    let rise = |t: f64| 1.0 - (-t / m.rise_tau).exp();
    if t <= m.peak_time {
        m.baseline + m.amplitude * rise(t)
    } else {
        m.baseline + m.amplitude * rise(m.peak_time) * (-(t - m.peak_time) / m.decay_tau).exp()
    }
}

/// Generator configuration. In JSON, `classes` maps `KW1..KW3` to a map of
/// `s1..sN` sensor models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    #[serde(default = "one")]
    pub trials_per_class: u32,
    #[serde(default)]
    pub sampling: SamplingSpec,
    /// Relative half-width of the per-trial, per-sensor amplitude gain.
    #[serde(default)]
    pub gain_drift: f64,
    pub classes: BTreeMap<QualityLabel, BTreeMap<String, SensorModel>>,
}

fn one() -> u32 {
    1
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let spec: ScenarioSpec =
            serde_json::from_str(text).map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn sensor_count(&self) -> usize {
        self.classes.values().next().map_or(0, BTreeMap::len)
    }

    /// Models of one class, ordered `s1..sN`.
    pub fn models(&self, label: QualityLabel) -> Result<Vec<SensorModel>, SynthError> {
        let sensors = self.classes.get(&label).ok_or(SynthError::UnknownLabel(label))?;
        (1..=sensors.len())
            .map(|i| {
                sensors
                    .get(&format!("s{i}"))
                    .copied()
                    .ok_or_else(|| SynthError::InvalidScenario(format!("{label}: sensors must be named s1..s{}", sensors.len())))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: String| Err(SynthError::InvalidScenario(m));
        self.sampling
            .validate()
            .map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
        if self.trials_per_class == 0 {
            return invalid("trials_per_class must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.gain_drift) {
            return invalid(format!("gain_drift must be in [0, 1), got {}", self.gain_drift));
        }
        let n = self.sensor_count();
        if n == 0 {
            return invalid("no sensors configured".into());
        }
        for label in QualityLabel::ALL {
            let models = self.models(label)?;
            if models.len() != n {
                return invalid(format!("{label} has {} sensors, expected {n}", models.len()));
            }
            for (i, m) in models.iter().enumerate() {
                m.validate()
                    .or_else(|e| invalid(format!("{label}/s{}: {e}", i + 1)))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrial {
    pub capture: TrialCapture,
    /// Samples that came out negative and were clamped to 0.
    pub clamped: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_seed(seed: u64, label: QualityLabel, trial: u32, sensor: usize) -> u64 {
    [label.index() as u64, trial as u64, sensor as u64]
        .iter()
        .fold(splitmix64(seed), |acc, &v| splitmix64(acc ^ v))
}

/// One seeded trial of `raw_samples_per_trial` samples per sensor.
pub fn generate_trial(s: &ScenarioSpec, label: QualityLabel, trial_index: u32) -> Result<GeneratedTrial, SynthError> {
    let models = s.models(label)?;
    let rows = s.sampling.raw_samples_per_trial;
    let mut samples = Matrix::zeros(rows, models.len());
    let mut clamped = 0;
    for (c, model) in models.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(s.seed, label, trial_index, c));
        let gain = if s.gain_drift > 0.0 {
            rng.random_range(1.0 - s.gain_drift..=1.0 + s.gain_drift)
        } else {
            1.0
        };
        let drifted = SensorModel {
            amplitude: model.amplitude * gain,
            ..*model
        };
        let noise = Normal::new(0.0, model.noise_sigma)
            .map_err(|e| SynthError::InvalidScenario(e.to_string()))?;
        for j in 0..rows {
            let t = j as f64 / s.sampling.sample_rate_hz;
            let mut v = response_curve(&drifted, t);
            if model.noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            if v < 0.0 {
                v = 0.0;
                clamped += 1;
            }
            samples[(j, c)] = v;
        }
    }
    Ok(GeneratedTrial {
        capture: TrialCapture {
            label,
            trial_index,
            sensor_names: (0..models.len()).map(sensor_name).collect(),
            samples,
        },
        clamped,
    })
}

/// Every class × `trials_per_class` trials, trial indices starting at 1.
pub fn generate_dataset(s: &ScenarioSpec) -> Result<(Vec<TrialCapture>, usize), SynthError> {
    s.validate()?;
    let mut trials = Vec::new();
    let mut clamped = 0;
    for label in QualityLabel::ALL {
        for t in 1..=s.trials_per_class {
            let g = generate_trial(s, label, t)?;
            clamped += g.clamped;
            trials.push(g.capture);
        }
    }
    Ok((trials, clamped))
}

/// Bundled scenarios shipped with the crate.
pub mod scenarios {
    /// General demo: three classes with distinct sensor profiles.
    pub const DEFAULT: &str = include_str!("../scenarios/default.json");
    /// Sub-second odor puff with ±30% amplitude drift, low baselines and
    /// additive noise.
    pub const DRIFT: &str = include_str!("../scenarios/drift.json");
    /// Sustained, widely separated responses with small noise.
    pub const SEPARATED: &str = include_str!("../scenarios/separated.json");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SensorModel {
        SensorModel {
            baseline: 100.0,
            amplitude: 800.0,
            rise_tau: 1.5,
            decay_tau: 6.0,
            peak_time: 8.0,
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn flat_and_origin() {
        let flat = SensorModel { amplitude: 0.0, ..model() };
        for t in [0.0, 1.0, 8.0, 19.0] {
            assert_eq!(response_curve(&flat, t), 100.0);
        }
        assert_eq!(response_curve(&model(), 0.0), 100.0);
    }

    #[test]
    fn monotone_rise_and_continuity() {
        let m = SensorModel { rise_tau: 0.01, ..model() };
        let mut prev = response_curve(&m, 0.0);
        for i in 1..=1000 {
            let v = response_curve(&m, m.peak_time * i as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
        assert!((prev - 900.0).abs() < 1e-9);
        let m = model();
        let left = response_curve(&m, m.peak_time);
        let right = 100.0 + 800.0 * (1.0 - (-m.peak_time / m.rise_tau).exp()) * (-(0.0) / m.decay_tau).exp();
        assert!((left - right).abs() < 1e-12);
        assert!((response_curve(&m, m.peak_time + 1e-12) - left).abs() < 1e-9);
    }

    #[test]
    fn bundled_scenarios_parse() {
        for text in [scenarios::DEFAULT, scenarios::DRIFT, scenarios::SEPARATED] {
            let s = ScenarioSpec::from_json(text).unwrap();
            assert_eq!(s.sensor_count(), 6);
        }
    }

    #[test]
    fn noiseless_matches_curve() {
        let mut s = ScenarioSpec::from_json(scenarios::DEFAULT).unwrap();
        s.gain_drift = 0.0;
        for models in s.classes.values_mut() {
            for m in models.values_mut() {
                m.noise_sigma = 0.0;
            }
        }
        let g = generate_trial(&s, QualityLabel::KW2, 1).unwrap();
        let models = s.models(QualityLabel::KW2).unwrap();
        for j in 0..60 {
            for (c, m) in models.iter().enumerate() {
                assert_eq!(g.capture.samples[(j, c)], response_curve(m, j as f64 / 3.0));
            }
        }
        assert_eq!(g.clamped, 0);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let s = ScenarioSpec::from_json(scenarios::DRIFT).unwrap();
        let a = generate_trial(&s, QualityLabel::KW1, 2).unwrap();
        let b = generate_trial(&s, QualityLabel::KW1, 2).unwrap();
        assert_eq!(a, b);
        let other = ScenarioSpec { seed: s.seed + 1, ..s.clone() };
        let c = generate_trial(&other, QualityLabel::KW1, 2).unwrap();
        assert_eq!(a.capture.samples.shape(), c.capture.samples.shape());
        assert_ne!(a.capture.samples, c.capture.samples);
        let d = generate_trial(&s, QualityLabel::KW1, 3).unwrap();
        assert_ne!(a.capture.samples, d.capture.samples);
    }

    #[test]
    fn clamping_is_counted() {
        let mut s = ScenarioSpec::from_json(scenarios::DEFAULT).unwrap();
        for models in s.classes.values_mut() {
            for m in models.values_mut() {
                *m = SensorModel {
                    baseline: 0.0,
                    amplitude: 0.0,
                    noise_sigma: 5.0,
                    ..*m
                };
            }
        }
        let g = generate_trial(&s, QualityLabel::KW3, 1).unwrap();
        assert!(g.clamped > 0);
        assert!(g.capture.samples.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rejects_bad_scenarios() {
        let mut s = ScenarioSpec::from_json(scenarios::DEFAULT).unwrap();
        s.classes.remove(&QualityLabel::KW2);
        assert_eq!(s.validate(), Err(SynthError::UnknownLabel(QualityLabel::KW2)));
        assert!(generate_trial(&s, QualityLabel::KW2, 1).is_err());

        let mut s = ScenarioSpec::from_json(scenarios::DEFAULT).unwrap();
        s.classes.get_mut(&QualityLabel::KW1).unwrap().get_mut("s1").unwrap().rise_tau = 0.0;
        assert!(matches!(s.validate(), Err(SynthError::InvalidScenario(_))));

        assert!(ScenarioSpec::from_json("{\"seed\": 1}").is_err());
    }

    #[test]
    fn dataset_counts() {
        let mut s = ScenarioSpec::from_json(scenarios::DEFAULT).unwrap();
        s.trials_per_class = 3;
        let (trials, _) = generate_dataset(&s).unwrap();
        assert_eq!(trials.len(), 9);
        assert!(trials.iter().all(|t| t.samples.shape() == (60, 6)));
    }
}
