use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use enose_core::datamodel::parse_dataset;
use enose_core::SamplingSpec;

const ARTIFACTS: [&str; 10] = [
    "normalized.csv",
    "templates.csv",
    "stddev.csv",
    "prune.json",
    "eigen.json",
    "scores.csv",
    "pareto.svg",
    "scatter.svg",
    "distribution.json",
    "distribution.txt",
];

fn enose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enose")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let csv = dir.join(name);
    let mut args = vec!["simulate", "--out", path(&csv)];
    args.extend_from_slice(extra);
    let out = enose(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    csv
}

fn total_misassigned(dir: &Path) -> f64 {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("distribution.json")).unwrap()).unwrap();
    v["total_misassigned_percent"].as_f64().unwrap()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&enose(&["--help"])), 0);
    assert_eq!(code(&enose(&["run", "--help"])), 0);
    assert_eq!(code(&enose(&[])), 2);
    assert_eq!(code(&enose(&["run", "--input", "x.csv"])), 2);
    assert_eq!(code(&enose(&["run", "-i", "x.csv", "-o", "y", "--normalize", "wavelet"])), 2);
}

#[test]
fn run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = simulate(tmp.path(), "demo.csv", &[]);
    let out_dir = tmp.path().join("out");
    let out = enose(&["run", "-i", path(&csv), "-o", path(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("misassigned"));
    for file in ARTIFACTS {
        assert!(out_dir.join(file).is_file(), "{file}");
    }
}

#[test]
fn missing_input_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = enose(&["run", "-i", path(&tmp.path().join("nope.csv")), "-o", path(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
}

#[test]
fn bad_config_is_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = simulate(tmp.path(), "demo.csv", &[]);
    let out_dir = tmp.path().join("out");
    for bad in [
        vec!["-k", "0"],
        vec!["-k", "9"],
        vec!["--prune-ratio", "0.5"],
        vec!["--drop-sensors", "0"],
        vec!["--raw-samples", "50"],
    ] {
        let mut args = vec!["run", "-i", path(&csv), "-o", path(&out_dir)];
        args.extend(bad.iter().copied());
        assert_eq!(code(&enose(&args)), 2, "{bad:?}");
        assert!(!out_dir.exists(), "{bad:?}");
    }
}

#[test]
fn constant_input_is_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("flat.csv");
    let mut text = String::from("label,trial,sample_index,s1,s2,s3,s4,s5,s6\n");
    for label in ["KW1", "KW2", "KW3"] {
        for i in 0..60 {
            text.push_str(&format!("{label},1,{i},7,7,7,7,7,7\n"));
        }
    }
    fs::write(&csv, text).unwrap();
    let out_dir = tmp.path().join("out");
    let out = enose(&["run", "-i", path(&csv), "-o", path(&out_dir), "--normalize", "power-average"]);
    assert_eq!(code(&out), 3);
    assert!(!out_dir.exists());
}

#[test]
fn simulate_round_trips_through_the_parser() {
    let tmp = tempfile::tempdir().unwrap();
    let a = simulate(tmp.path(), "a.csv", &["--trials", "3"]);
    let trials = parse_dataset(fs::File::open(&a).unwrap(), &SamplingSpec::default()).unwrap();
    assert_eq!(trials.len(), 9);
    let groups: BTreeSet<(String, u32)> = trials.iter().map(|t| (t.label.to_string(), t.trial_index)).collect();
    assert_eq!(groups.len(), 9);
    assert!(trials.iter().all(|t| t.samples.shape() == (60, 6)));

    let b = simulate(tmp.path(), "b.csv", &["--trials", "3", "--seed", "12345"]);
    let other = parse_dataset(fs::File::open(&b).unwrap(), &SamplingSpec::default()).unwrap();
    assert_eq!(other.len(), 9);
    assert!(other.iter().zip(&trials).all(|(x, y)| x.samples.shape() == y.samples.shape()));
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let again = simulate(tmp.path(), "c.csv", &["--trials", "3"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn simulate_rejects_bad_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("s.json");
    fs::write(&scenario, r#"{"seed": 1, "classes": {"KW1": {}}}"#).unwrap();
    let out = enose(&["simulate", "--scenario", path(&scenario), "--out", path(&tmp.path().join("x.csv"))]);
    assert_eq!(code(&out), 2);
    let out = enose(&["simulate", "--scenario", path(&tmp.path().join("absent.json")), "--out", "x.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn fft_run_beats_power_average_run_on_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = simulate(tmp.path(), "drift.csv", &["--preset", "drift"]);
    let pa = tmp.path().join("pa");
    let fft = tmp.path().join("fft");
    assert_eq!(code(&enose(&["run", "-i", path(&csv), "-o", path(&pa), "--normalize", "power-average"])), 0);
    assert_eq!(code(&enose(&["run", "-i", path(&csv), "-o", path(&fft), "--normalize", "fft"])), 0);
    assert!(total_misassigned(&fft) < total_misassigned(&pa));
}

#[test]
fn render_matches_run_output() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = simulate(tmp.path(), "demo.csv", &[]);
    let out_dir = tmp.path().join("out");
    assert_eq!(code(&enose(&["run", "-i", path(&csv), "-o", path(&out_dir), "-k", "3"])), 0);
    let rendered = tmp.path().join("rendered");
    let out = enose(&["render", "--from", path(&out_dir), "--out", path(&rendered)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["pareto.svg", "scatter.svg"] {
        assert_eq!(fs::read(out_dir.join(file)).unwrap(), fs::read(rendered.join(file)).unwrap());
    }
    assert_eq!(code(&enose(&["render", "--from", path(&tmp.path().join("empty"))])), 2);
}

#[test]
fn dropping_a_sensor() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = simulate(tmp.path(), "demo.csv", &[]);
    let out_dir = tmp.path().join("out");
    let out = enose(&["run", "-i", path(&csv), "-o", path(&out_dir), "--drop-sensors", "1,6"]);
    assert_eq!(code(&out), 0);
    let header = fs::read_to_string(out_dir.join("stddev.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "s2,s3,s4,s5");
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = simulate(tmp.path(), "demo.csv", &["--trials", "2"]);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&enose(&["run", "-i", path(&csv), "-o", path(&a)])), 0);
    assert_eq!(code(&enose(&["run", "-i", path(&csv), "-o", path(&b)])), 0);
    for rep in ["rep-1", "rep-2"] {
        for file in ARTIFACTS {
            assert_eq!(fs::read(a.join(rep).join(file)).unwrap(), fs::read(b.join(rep).join(file)).unwrap(), "{rep}/{file}");
        }
    }
}
