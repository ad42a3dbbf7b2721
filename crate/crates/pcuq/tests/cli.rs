//! End-to-end checks of the compiled binary: exit codes, artifact hygiene on
//! failure, the cross-validation workflow, and a full Ishigami study driven
//! through the CLI.

use std::path::Path;
use std::process::{Command, Output};

fn pcuq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcuq"))
        .args(args)
        .output()
        .expect("spawn pcuq")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("study.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const TOY_CONFIG: &str = r#"{
  "model": "toy_leakage",
  "order": 2,
  "nq": 3,
  "seed": 11,
  "samples": 50000,
  "times": [100.0, 500.0, 1500.0]
}"#;

#[test]
fn gen_nodes_writes_the_expected_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TOY_CONFIG);
    let out = dir.path().join("out");
    let status = pcuq(&["gen-nodes", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let nodes = std::fs::read_to_string(out.join("nodes.csv")).unwrap();
    let lines: Vec<&str> = nodes.lines().collect();
    assert_eq!(lines.len(), 1 + 81); // header + 3^4 nodes
}

#[test]
fn gen_nodes_625_rows_for_production_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TOY_CONFIG);
    let out = dir.path().join("out");
    let status = pcuq(&[
        "gen-nodes",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--nq",
        "5",
    ]);
    assert!(status.status.success());
    let nodes = std::fs::read_to_string(out.join("nodes.csv")).unwrap();
    assert_eq!(nodes.lines().count(), 1 + 625);
    assert!(nodes
        .lines()
        .next()
        .unwrap()
        .starts_with("node_id,xi_1,xi_2,xi_3,xi_4,porosity"));
}

#[test]
fn invalid_spec_path_fails_with_no_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
          "spec": "/does/not/exist.json",
          "model": "toy_leakage",
          "order": 2,
          "nq": 2
        }"#,
    );
    let out = dir.path().join("out");
    let output = pcuq(&["gen-nodes", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(!output.status.success());
    assert!(!out.join("nodes.csv").exists());
    assert!(std::fs::read_dir(&out)
        .map(|entries| entries.count() == 0)
        .unwrap_or(true));
}

#[test]
fn project_reports_missing_node_with_its_id() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TOY_CONFIG);
    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    // 81-node grid but only one row supplied
    let results = dir.path().join("results.csv");
    std::fs::write(&results, "node_id,100,500,1500\n0,1.0,2.0,3.0\n").unwrap();
    let output = pcuq(&[
        "project",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--results",
        results.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("missing node_id"), "stderr: {stderr}");
    assert!(!out.join("expansion.json").exists());
}

#[test]
fn validate_warns_on_identical_grids_and_cross_validates_otherwise() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TOY_CONFIG);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let run = |args: &[&str]| {
        let output = pcuq(args);
        assert!(
            output.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        output
    };
    run(&["evaluate", "--config", &config, "--out", out_s]);
    run(&[
        "project",
        "--config",
        &config,
        "--out",
        out_s,
        "--results",
        out.join("results.csv").to_str().unwrap(),
    ]);

    // validation results on the non-nested nq=2 grid
    let out2 = dir.path().join("out2");
    run(&["evaluate", "--config", &config, "--out", out2.to_str().unwrap(), "--nq", "2"]);
    run(&[
        "validate",
        "--config",
        &config,
        "--out",
        out_s,
        "--expansion",
        out.join("expansion.json").to_str().unwrap(),
        "--validation-results",
        out2.join("results.csv").to_str().unwrap(),
        "--validation-nq",
        "2",
    ]);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("validate_summary.json")).unwrap())
            .unwrap();
    assert!(summary["warnings"].as_array().unwrap().is_empty());
    let validation = std::fs::read_to_string(out.join("validation.csv")).unwrap();
    assert_eq!(validation.lines().count(), 1 + 3);

    // same grid for construction and validation: documented misuse, warned
    let output = run(&[
        "validate",
        "--config",
        &config,
        "--out",
        out_s,
        "--expansion",
        out.join("expansion.json").to_str().unwrap(),
        "--validation-results",
        out.join("results.csv").to_str().unwrap(),
        "--validation-nq",
        "3",
    ]);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("nested"), "stderr: {stderr}");
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("validate_summary.json")).unwrap())
            .unwrap();
    assert!(summary["warnings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|w| w["code"] == "nested-validation"));
}

#[test]
fn ishigami_study_through_the_cli_reproduces_the_oracle_index() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
          "model": "ishigami",
          "order": 9,
          "nq": 10,
          "seed": 3,
          "samples": 10000
        }"#,
    );
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let run = |args: &[&str]| {
        let output = pcuq(args);
        assert!(
            output.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    run(&["evaluate", "--config", &config, "--out", out_s]);
    run(&[
        "project",
        "--config",
        &config,
        "--out",
        out_s,
        "--results",
        out.join("results.csv").to_str().unwrap(),
    ]);
    run(&["sobol", "--config", &config, "--out", out_s, "--expansion",
        out.join("expansion.json").to_str().unwrap()]);

    let sobol = std::fs::read_to_string(out.join("sobol.csv")).unwrap();
    let mut lines = sobol.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| -> f64 {
        let idx = header.iter().position(|h| *h == name).unwrap();
        row[idx].parse().unwrap()
    };
    // closed-form Ishigami decomposition with a = 7, b = 0.1
    let pi4 = std::f64::consts::PI.powi(4);
    let v1 = 0.5 * (1.0 + 0.1 * pi4 / 5.0) * (1.0 + 0.1 * pi4 / 5.0);
    let v2 = 49.0 / 8.0;
    let v13 = 8.0 * 0.01 * pi4 * pi4 / 225.0;
    let v = v1 + v2 + v13;
    assert!((col("S_1") - v1 / v).abs() < 1e-2, "S_1 {}", col("S_1"));
    assert!((col("S_2") - v2 / v).abs() < 1e-2);
    assert!(col("S_3").abs() < 1e-2);
    assert!((col("T_3") - v13 / v).abs() < 1e-2);
    assert!((col("T_mix") - v13 / v).abs() < 1e-2);
    let defined_idx = header.iter().position(|h| *h == "defined").unwrap();
    assert_eq!(row[defined_idx], "true");
}

/// Chance-constrained search on the shipped time-series model, with the
/// injection rate (germ dimension 4) as the design variable and the
/// end-of-horizon leakage as the constrained quantity. The expected optimum
/// is a regression value frozen from the first run of this exact
/// configuration (fixed seed, CRN).
#[test]
fn design_opt_regression_on_toy_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
          "model": "toy_leakage",
          "order": 2,
          "nq": 3,
          "seed": 77,
          "samples": 200000,
          "times": [1500.0]
        }"#,
    );
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let run = |args: &[&str]| {
        let output = pcuq(args);
        assert!(
            output.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    run(&["evaluate", "--config", &config, "--out", out_s]);
    run(&[
        "project",
        "--config",
        &config,
        "--out",
        out_s,
        "--results",
        out.join("results.csv").to_str().unwrap(),
    ]);
    // lognormal design parameter: bounds are in log space,
    // log-rate mean 2.1827, sd 0.2
    run(&[
        "design-opt",
        "--config",
        &config,
        "--out",
        out_s,
        "--expansion",
        out.join("expansion.json").to_str().unwrap(),
        "--design-dim",
        "4",
        "--threshold",
        "0.08",
        "--target-prob",
        "0.05",
        "--lo",
        "1.5827",
        "--hi",
        "2.7827",
        "--tol",
        "1e-3",
    ]);
    let result: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("design_opt.json")).unwrap()).unwrap();
    let q_star = result["q_star"].as_f64().unwrap();
    // regression value from the first run of this configuration
    let frozen = REGRESSION_Q_STAR;
    assert!(
        (q_star - frozen).abs() < 1e-9,
        "q_star {q_star} drifted from frozen {frozen}"
    );
    assert!(result["probability_at_q_star"].as_f64().unwrap() < 0.05);
    let sweep = std::fs::read_to_string(out.join("design_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 41);
}

/// Frozen by running the configuration above once; the CRN search is
/// bit-reproducible, so any drift signals a behavior change in the sampler,
/// the surrogate, or the bisection.
const REGRESSION_Q_STAR: f64 = 2.6842625;
