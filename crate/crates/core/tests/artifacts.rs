use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use enose_core::pipeline::{self, PipelineConfig, PipelineError};
use enose_core::synthgen::{scenarios, ScenarioSpec};
use enose_core::NormalizationMethod;

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Checks the subset of JSON Schema the shipped schemas use.
fn validate(value: &Value, schema: &Value, root: &Value, at: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.strip_prefix("#/$defs/").ok_or_else(|| format!("unsupported ref {r}"))?;
        return validate(value, &root["$defs"][name], root, at);
    }
    if let Some(t) = schema.get("type").and_then(Value::as_str) {
        let ok = match t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "boolean" => value.is_boolean(),
            "number" => value.is_number(),
            "integer" => value.is_u64() || value.is_i64(),
            other => return Err(format!("unsupported type {other}")),
        };
        if !ok {
            return Err(format!("{at}: expected {t}, got {value}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(value) {
            return Err(format!("{at}: {value} not in {options:?}"));
        }
    }
    if let Some(x) = value.as_f64() {
        if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
            if x < min {
                return Err(format!("{at}: {x} < {min}"));
            }
        }
        if let Some(max) = schema.get("maximum").and_then(Value::as_f64) {
            if x > max + 1e-12 {
                return Err(format!("{at}: {x} > {max}"));
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            validate(v, items, root, &format!("{at}[{i}]"))?;
        }
    }
    if let Some(obj) = value.as_object() {
        for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            let key = key.as_str().unwrap();
            if !obj.contains_key(key) {
                return Err(format!("{at}: missing {key}"));
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, v) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => validate(v, s, root, &format!("{at}.{k}"))?,
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => return Err(format!("{at}: unexpected key {k}")),
                    Some(s) if s.is_object() => validate(v, s, root, &format!("{at}.{k}"))?,
                    _ => {}
                },
            }
        }
    }
    Ok(())
}

fn check_json(dir: &Path, file: &str, schema_file: &str) {
    let value: Value = serde_json::from_str(&fs::read_to_string(dir.join(file)).unwrap()).unwrap();
    let s = schema(schema_file);
    if let Err(e) = validate(&value, &s, &s, "$") {
        panic!("{file}: {e}");
    }
}

fn first_line(path: PathBuf) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn demo_run(config: &PipelineConfig, drop: &[usize]) -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("capture.csv");
    pipeline::simulate(&ScenarioSpec::from_json(scenarios::DEFAULT).unwrap(), &input).unwrap();
    let config = PipelineConfig {
        drop_sensors: drop.to_vec(),
        ..config.clone()
    };
    pipeline::run(&config, &input, &tmp.path().join("out")).unwrap();
    tmp
}

#[test]
fn artifacts_follow_shipped_schemas() {
    for method in [NormalizationMethod::Fft, NormalizationMethod::PowerAverage] {
        let config = PipelineConfig {
            normalization: method,
            ..Default::default()
        };
        let tmp = demo_run(&config, &[]);
        let out = tmp.path().join("out");
        check_json(&out, "eigen.json", "eigen.schema.json");
        check_json(&out, "prune.json", "prune.schema.json");
        check_json(&out, "distribution.json", "distribution.schema.json");

        let sensors = "s1,s2,s3,s4,s5,s6";
        assert_eq!(first_line(out.join("normalized.csv")), format!("# method={}", method.as_str()));
        let normalized = fs::read_to_string(out.join("normalized.csv")).unwrap();
        assert_eq!(normalized.lines().nth(1).unwrap(), format!("label,trial,sample_index,{sensors}"));
        assert_eq!(first_line(out.join("templates.csv")), format!("quality,{sensors}"));
        assert_eq!(first_line(out.join("stddev.csv")), sensors);
        assert_eq!(first_line(out.join("scores.csv")), "row_id,label,trial,assigned,distance,pc1,pc2");
        assert_eq!(fs::read_to_string(out.join("scores.csv")).unwrap().lines().count(), 61);
    }
}

#[test]
fn dropping_sensor_six_shrinks_headers() {
    let tmp = demo_run(&PipelineConfig::default(), &[6]);
    let out = tmp.path().join("out");
    assert_eq!(first_line(out.join("stddev.csv")), "s1,s2,s3,s4,s5");
    check_json(&out, "prune.json", "prune.schema.json");
}

#[test]
fn bundled_scenarios_follow_schema() {
    let s = schema("scenario.schema.json");
    for text in [scenarios::DEFAULT, scenarios::DRIFT, scenarios::SEPARATED] {
        let value: Value = serde_json::from_str(text).unwrap();
        validate(&value, &s, &s, "$").unwrap();
        let round: Value = serde_json::from_str(&ScenarioSpec::from_json(text).unwrap().to_json()).unwrap();
        validate(&round, &s, &s, "$").unwrap();
    }
}

#[test]
fn validator_rejects_bad_documents() {
    let s = schema("distribution.schema.json");
    let bad: Value = serde_json::json!({"normalization": "wavelet"});
    assert!(validate(&bad, &s, &s, "$").is_err());
    let e = schema("eigen.schema.json");
    let bad: Value = serde_json::json!({
        "eigenvalues": [1.0], "eigenvectors": [[1.0]], "variance_explained": [1.5],
        "column_means": [0.0], "centered": true, "sweeps": 1
    });
    assert!(validate(&bad, &e, &e, "$").is_err());
}

#[test]
fn render_reproduces_the_plots() {
    let tmp = demo_run(&PipelineConfig::default(), &[]);
    let out = tmp.path().join("out");
    let again = tmp.path().join("again");
    pipeline::render_from_artifacts(&out, &again).unwrap();
    for file in ["pareto.svg", "scatter.svg"] {
        assert_eq!(fs::read(out.join(file)).unwrap(), fs::read(again.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn render_without_artifacts_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let err = pipeline::render_from_artifacts(tmp.path(), &tmp.path().join("x")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn failed_run_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let err = pipeline::run(&PipelineConfig::default(), &tmp.path().join("missing.csv"), &out).unwrap_err();
    assert!(matches!(err, PipelineError::Io { .. }));
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());

    // the second replication is missing KW3, so no replication is written
    let mut scenario = ScenarioSpec::from_json(scenarios::DEFAULT).unwrap();
    scenario.trials_per_class = 2;
    let input = tmp.path().join("capture.csv");
    pipeline::simulate(&scenario, &input).unwrap();
    let text = fs::read_to_string(&input).unwrap();
    let trimmed: String = text.lines().filter(|l| !l.starts_with("KW3,2,")).map(|l| format!("{l}\n")).collect();
    fs::write(&input, trimmed).unwrap();
    let err = pipeline::run(&PipelineConfig::default(), &input, &out).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn replications_get_their_own_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let mut scenario = ScenarioSpec::from_json(scenarios::DEFAULT).unwrap();
    scenario.trials_per_class = 3;
    let input = tmp.path().join("capture.csv");
    pipeline::simulate(&scenario, &input).unwrap();
    let out = tmp.path().join("out");
    let summaries = pipeline::run(&PipelineConfig::default(), &input, &out).unwrap();
    assert_eq!(summaries.len(), 3);
    for i in 1..=3 {
        let dir = out.join(format!("rep-{i}"));
        assert!(dir.join("distribution.json").is_file());
        check_json(&dir, "eigen.json", "eigen.schema.json");
    }
}
