//! End-to-end tests of the `mggd` binary: exit codes, determinism, and the
//! file formats each subcommand reads and writes.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::validate_schema;
use serde_json::Value;
use tempfile::tempdir;

fn mggd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mggd"))
}

fn run(args: &[&str]) -> Output {
    mggd().args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn sample_is_deterministic_and_reports_params() {
    let dir = tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let base = [
        "sample", "--p", "3", "--beta", "0.2", "--m", "1", "--rho", "0.8", "--n", "200",
        "--seed", "42",
    ];
    let run_a = run(&[&base[..], &["--out", out_a.to_str().unwrap()]].concat());
    assert!(run_a.status.success(), "{}", stderr_of(&run_a));
    let run_b = run(&[&base[..], &["--out", out_b.to_str().unwrap()]].concat());
    assert!(run_b.status.success());

    let bytes_a = fs::read(&out_a).unwrap();
    let bytes_b = fs::read(&out_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed must give identical files");
    assert_eq!(
        String::from_utf8_lossy(&bytes_a).lines().count(),
        201,
        "header plus 200 rows"
    );

    let params: Value = serde_json::from_slice(&run_a.stdout).unwrap();
    assert_eq!(params["p"], 3);
    assert_eq!(params["seed"], 42);
    assert_eq!(params["scatter"][0][1], 0.8);
}

#[test]
fn sample_rejects_invalid_rho_with_usage_exit() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let res = run(&[
        "sample", "--p", "3", "--beta", "0.2", "--m", "1", "--rho", "1.0", "--n", "10",
        "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = stderr_of(&res);
    assert!(err.starts_with("error:"), "{err}");
}

#[test]
fn sample_rejects_non_spd_scatter_file_with_exit_3() {
    let dir = tempdir().unwrap();
    let scatter = dir.path().join("bad.csv");
    fs::write(&scatter, "1,1\n1,1\n").unwrap();
    let out = dir.path().join("x.csv");
    let res = run(&[
        "sample", "--p", "2", "--beta", "0.3", "--m", "1", "--scatter-file",
        scatter.to_str().unwrap(), "--n", "10", "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(stderr_of(&res).starts_with("error:"));
}

#[test]
fn sample_renormalizes_off_trace_scatter_with_warning() {
    let dir = tempdir().unwrap();
    let scatter = dir.path().join("scaled.csv");
    fs::write(&scatter, "2,0\n0,2\n").unwrap();
    let out = dir.path().join("x.csv");
    let res = run(&[
        "sample", "--p", "2", "--beta", "0.3", "--m", "1", "--scatter-file",
        scatter.to_str().unwrap(), "--n", "10", "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    assert!(stderr_of(&res).contains("warning"), "{}", stderr_of(&res));
    let params: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(params["scatter"][0][0], 1.0);
}

#[test]
fn fit_writes_schema_valid_report_and_exit_codes() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let report_path = dir.path().join("report.json");
    let sample = run(&[
        "sample", "--p", "3", "--beta", "0.3", "--m", "1", "--rho", "0.8", "--n", "500",
        "--seed", "7", "--out", data.to_str().unwrap(),
    ]);
    assert!(sample.status.success());

    // Known-beta fit on its own sample converges with exit 0.
    let fit = run(&[
        "fit", "--data", data.to_str().unwrap(), "--beta", "0.3", "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(fit.status.code(), Some(0), "{}", stderr_of(&fit));

    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let schema: Value = serde_json::from_str(include_str!("../schemas/report.schema.json")).unwrap();
    validate_schema(&report, &schema, "$").unwrap();
    assert_eq!(report["report"]["converged"], true);
    assert!(report["report"]["iterations"].as_u64().unwrap() <= 100);

    // Joint fit to stdout.
    let joint = run(&["fit", "--data", data.to_str().unwrap()]);
    assert_eq!(joint.status.code(), Some(0), "{}", stderr_of(&joint));
    let joint_report: Value = serde_json::from_slice(&joint.stdout).unwrap();
    validate_schema(&joint_report, &schema, "$").unwrap();
    let beta_hat = joint_report["report"]["beta"].as_f64().unwrap();
    assert!((beta_hat - 0.3).abs() < 0.1, "beta_hat {beta_hat}");

    // Exhausting the iteration budget exits 4 but still writes the report.
    let starved_path = dir.path().join("starved.json");
    let starved = run(&[
        "fit", "--data", data.to_str().unwrap(), "--beta", "0.3", "--max-iter", "2",
        "--out", starved_path.to_str().unwrap(),
    ]);
    assert_eq!(starved.status.code(), Some(4));
    assert!(stderr_of(&starved).starts_with("error:"));
    let starved_report: Value =
        serde_json::from_str(&fs::read_to_string(&starved_path).unwrap()).unwrap();
    assert_eq!(starved_report["report"]["converged"], false);
}

#[test]
fn fit_zero_row_exits_5_with_row_index() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("zero.csv");
    fs::write(&data, "x0,x1\n1.0,2.0\n0,0\n3.0,1.0\n").unwrap();
    let res = run(&["fit", "--data", data.to_str().unwrap(), "--beta", "0.5"]);
    assert_eq!(res.status.code(), Some(5));
    let err = stderr_of(&res);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("row 2"), "{err}");
}

#[test]
fn fit_missing_flag_is_usage_error() {
    let res = run(&["fit"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr_of(&res).contains("error:"));
}

#[test]
fn trace_emits_all_columns_and_reparses() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let res = run(&[
        "trace", "--p", "3", "--beta", "0.2", "--m", "1", "--rho", "0.8", "--n", "200",
        "--seed", "0", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,C_identity,C_scm,C_true,D_normalized,D_unnormalized"
    );
    let mut floats_seen = 0;
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6, "row {k}");
        assert_eq!(fields[0].parse::<usize>().unwrap(), k);
        for field in &fields[1..] {
            if !field.is_empty() {
                let v: f64 = field.parse().unwrap();
                assert_eq!(format!("{v}"), **field, "round-trip formatting");
                floats_seen += 1;
            }
        }
    }
    assert!(floats_seen > 20, "trace unexpectedly short");
}

#[test]
fn experiment_preset_runs_and_is_deterministic() {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .join("presets/fig5_bias.json");
    let dir = tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let res = run(&[
            "experiment", "--config", preset.to_str().unwrap(), "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", stderr_of(&res));
        assert!(String::from_utf8_lossy(&res.stdout).contains("bias_norm"));
    }
    let a = fs::read(out_a.join("metrics.csv")).unwrap();
    let b = fs::read(out_b.join("metrics.csv")).unwrap();
    assert_eq!(a, b, "same seed must reproduce metrics.csv byte-identically");
}

#[test]
fn experiment_rejects_empty_n_grid_with_field_path() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{
  "kind": "bias", "p": 3, "rho": 0.8, "beta_true": 0.2, "m_true": 1.0,
  "n_grid": [], "runs": 4, "mode": "known_beta", "master_seed": 1
}"#,
    )
    .unwrap();
    let res = run(&[
        "experiment", "--config", cfg.to_str().unwrap(), "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = stderr_of(&res);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("n_grid"), "{err}");
}
