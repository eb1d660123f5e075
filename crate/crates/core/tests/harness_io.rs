mod common;

use std::fs;

use accel_core::harness::{
    certify_trace_file, emit_trace, preset_in, run_all, run_experiment, trace_from_json,
    EnergyFormChoice, ExperimentConfig, Outputs, TraceFormat,
};
use accel_core::Algorithm;

fn fig1_config(algo: Algorithm, dir: &std::path::Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::new("quad2d", algo, 0.4, Some(2.0));
    config.certify = true;
    config.outputs = Outputs {
        trace_path: Some(dir.join(format!("{algo}.json"))),
        certificate_path: Some(dir.join(format!("{algo}_certificate.json"))),
        format: TraceFormat::Json,
    };
    config
}

#[test]
fn json_trace_recertifies_identically() {
    let dir = tempfile::tempdir().unwrap();
    for algo in [Algorithm::Nag, Algorithm::MNag] {
        let config = fig1_config(algo, dir.path());
        let outcome = run_experiment(&config).unwrap();
        let path = config.outputs.trace_path.unwrap();
        let (trace, cert) = certify_trace_file(&path, "quad2d", EnergyFormChoice::Auto).unwrap();
        assert_eq!(trace, outcome.trace);
        assert_eq!(Some(cert), outcome.certificate);
    }
}

#[test]
fn reloaded_gaps_are_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let config = fig1_config(Algorithm::Nag, dir.path());
    let outcome = run_experiment(&config).unwrap();
    let text = fs::read_to_string(config.outputs.trace_path.unwrap()).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let reloaded = trace_from_json(&text).unwrap();
    for (rec, row) in outcome
        .trace
        .records
        .iter()
        .zip(doc["records"].as_array().unwrap())
    {
        let gap = outcome
            .problem
            .objective
            .gap(&rec.x, &outcome.problem.optimum);
        assert_eq!(row["f_gap"].as_f64().unwrap().to_bits(), gap.to_bits());
    }
    assert_eq!(reloaded, outcome.trace);
}

#[test]
fn csv_rows_follow_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fig1_config(Algorithm::MNag, dir.path());
    config.iters = 2;
    config.outputs.trace_path = Some(dir.path().join("short.csv"));
    config.outputs.format = TraceFormat::Csv;
    run_experiment(&config).unwrap();
    let text = fs::read_to_string(dir.path().join("short.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn presets_write_deterministic_files() {
    for format in [TraceFormat::Csv, TraceFormat::Json] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for dir in [&a, &b] {
            for name in ["fig1", "fig2"] {
                let configs = preset_in(name, dir.path(), format).unwrap();
                for outcome in run_all(&configs) {
                    assert_eq!(outcome.unwrap().exit_code(), 0);
                }
            }
        }
        let mut names: Vec<_> = fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names.len(), 7, "{names:?}");
        for name in names {
            let left = fs::read(a.path().join(&name)).unwrap();
            let right = fs::read(b.path().join(&name)).unwrap();
            assert_eq!(left, right, "{name:?} differs between runs");
        }
    }
}

#[test]
fn mnag_csv_has_no_monotone_violations() {
    let dir = tempfile::tempdir().unwrap();
    let configs = preset_in("fig1", dir.path(), TraceFormat::Csv).unwrap();
    for outcome in run_all(&configs) {
        outcome.unwrap();
    }
    let text = fs::read_to_string(dir.path().join("fig1_m-nag.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let column = header
        .iter()
        .position(|h| *h == "monotone_violation")
        .unwrap();
    for line in lines {
        assert_eq!(line.split(',').nth(column), Some("0"));
    }

    let nag = fs::read_to_string(dir.path().join("fig1_nag.csv")).unwrap();
    assert!(nag
        .lines()
        .skip(1)
        .any(|l| l.split(',').nth(column) == Some("1")));
}

#[test]
fn tampered_trace_fails_recertification() {
    let dir = tempfile::tempdir().unwrap();
    let config = fig1_config(Algorithm::Nag, dir.path());
    let outcome = run_experiment(&config).unwrap();
    let mut trace = outcome.trace.clone();
    trace.records[10].x *= 50.0;
    let path = dir.path().join("tampered.json");
    emit_trace(
        &trace,
        &outcome.problem.objective,
        &outcome.problem.optimum,
        None,
        TraceFormat::Json,
        &path,
    )
    .unwrap();
    let (_, cert) = certify_trace_file(&path, "quad2d", EnergyFormChoice::Auto).unwrap();
    assert!(!cert.overall_pass);
}
