//! End-to-end checks of the command-line binary: exit codes, output shapes,
//! and determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modeshape"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_file(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn analyze_smib_succeeds_with_unit_stiffness() {
    let (code, stdout, _) = run(&["analyze", "--model", "smib"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["stiffness_ratio"], serde_json::json!(1.0));
    assert_eq!(v["unstable"], serde_json::json!(false));
    assert_eq!(v["states"], serde_json::json!(["delta", "omega"]));
}

#[test]
fn analyze_stiff_chain_stiffness_matches_rate_ratio() {
    let (code, stdout, _) = run(&[
        "analyze",
        "--model",
        "stiff-chain",
        "--smin=-1",
        "--smax=-100",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let s = v["stiffness_ratio"].as_f64().unwrap();
    assert!((s - 100.0).abs() < 1e-9, "S = {s}");
}

#[test]
fn analyze_unstable_linear_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "unstable.json", r#"{"nu":1,"mu":0,"f_x":[[0.5]]}"#);
    let (code, stdout, stderr) = run(&["analyze", "--linear", &path]);
    assert_eq!(code, 2, "stdout: {stdout}\nstderr: {stderr}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["unstable"], serde_json::json!(true));
    assert!(stderr.contains("unstable"));
}

#[test]
fn analyze_singular_algebraic_jacobian_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(
        dir.path(),
        "singular.json",
        r#"{"nu":1,"mu":1,"f_x":[[-1.0]],"f_y":[[1.0]],"g_x":[[1.0]],"g_y":[[0.0]]}"#,
    );
    let (code, _, stderr) = run(&["analyze", "--linear", &path]);
    assert_eq!(code, 3, "stderr: {stderr}");
    assert!(stderr.contains("error"));
}

#[test]
fn theta_out_of_range_is_a_usage_error() {
    let (code, _, stderr) = run(&[
        "deform", "--model", "smib", "--method", "theta:0.6", "--h", "0.1",
    ]);
    assert_eq!(code, 1, "stderr: {stderr}");
}

#[test]
fn unknown_model_and_missing_model_are_usage_errors() {
    let (code, _, _) = run(&["analyze", "--model", "pendulum"]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&["analyze"]);
    assert_eq!(code, 1);
}

#[test]
fn model_and_linear_conflict() {
    let (code, _, _) = run(&["analyze", "--model", "smib", "--linear", "x.json"]);
    assert_eq!(code, 1);
}

#[test]
fn hmax_without_thresholds_is_a_usage_error() {
    let (code, _, stderr) = run(&[
        "hmax", "--model", "smib", "--method", "tm", "--hmin", "1e-3", "--hmax", "1e-1",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("eps"));
}

#[test]
fn single_point_grid_is_a_usage_error() {
    let (code, _, _) = run(&[
        "sweep", "--model", "smib", "--method", "tm", "--hmin", "1e-2", "--hmax", "1e-1",
        "--hpoints", "1",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn export_to_unwritable_path_exits_4() {
    let (code, _, stderr) = run(&[
        "export",
        "--model",
        "smib",
        "--out",
        "/nonexistent-dir-for-sure/model.json",
    ]);
    assert_eq!(code, 4, "stderr: {stderr}");
}

#[test]
fn sweep_row_count_and_header() {
    let (code, stdout, _) = run(&[
        "sweep", "--model", "smib", "--method", "heun:2", "--hmin", "1e-4", "--hmax", "1e-1",
        "--hpoints", "20",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(
        lines[0],
        "h,mode_re,mode_im,zeta_pct,state,eps_s_pct,eps_p_pct,flags"
    );
    // 20 grid points x 2 modes x top-2 states (top-pf capped at nu).
    assert_eq!(lines.len(), 1 + 20 * 2 * 2);
}

#[test]
fn theta_sweep_has_zero_eps_p_column() {
    let (code, stdout, _) = run(&[
        "sweep", "--model", "smib", "--method", "theta:0.3", "--hmin", "1e-3", "--hmax",
        "1e-1", "--hpoints", "6",
    ]);
    assert_eq!(code, 0);
    for line in stdout.lines().skip(1) {
        let eps_p: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
        assert!(eps_p.abs() < 1e-7, "line: {line}");
    }
}

#[test]
fn deform_heun_on_chain_reports_nonzero_eps_p() {
    let (code, stdout, _) = run(&[
        "deform", "--model", "stiff-chain", "--nslow", "2", "--nfast", "1", "--smin=-1",
        "--smax=-100", "--coupling", "0.5", "--method", "heun:2", "--h", "0.01",
        "--n-modes", "0", "--top-pf", "3",
    ]);
    assert_eq!(code, 0);
    let max_eps = stdout
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(6).unwrap().parse::<f64>().ok())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max_eps > 0.01, "max |eps_p| = {max_eps}");
}

#[test]
fn hmax_json_scenarios_and_sentinels() {
    // Single threshold: one scenario.
    let (code, stdout, _) = run(&[
        "hmax", "--model", "smib", "--method", "theta:0.47", "--hmin", "1e-3", "--hmax",
        "0.5", "--hpoints", "12", "--eps-p", "5",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["hmax"], serde_json::json!("infinity"));
    assert_eq!(v[0]["method"], serde_json::json!("theta:0.47"));

    // Both thresholds: three scenarios ordered eps_s-only, eps_p-only, both.
    let (code, stdout, _) = run(&[
        "hmax", "--model", "smib", "--method", "tm", "--hmin", "1e-3", "--hmax", "0.5",
        "--hpoints", "12", "--eps-s", "5", "--eps-p", "5",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    assert!(arr[0]["criteria"]["eps_p"].is_null());
    assert!(arr[0]["criteria"]["eps_s"].is_number());
    assert!(arr[1]["criteria"]["eps_s"].is_null());
    assert!(arr[1]["criteria"]["eps_p"].is_number());
    assert!(arr[2]["criteria"]["eps_s"].is_number());
    assert!(arr[2]["criteria"]["eps_p"].is_number());
    // TM's eps_p never binds, so the combined scenario equals the eps_s one.
    assert_eq!(arr[0]["hmax"], arr[2]["hmax"]);
}

#[test]
fn simulate_row_count_and_tend_zero_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let (code, _, stderr) = run(&[
        "simulate", "--model", "smib", "--method", "tm", "--h", "0.01", "--tend", "5",
        "--perturb", "delta:+0.1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");
    let content = std::fs::read_to_string(&out).unwrap();
    assert_eq!(content.lines().count(), 1 + 501);
    assert!(content.starts_with("t,x_1,x_2,y_1\n"));
    assert!(stderr.contains("500 steps"));

    let (code, stdout, _) = run(&[
        "simulate", "--model", "smib", "--method", "tm", "--h", "0.01", "--tend", "0",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "t,x_1,x_2,y_1\n");
}

#[test]
fn simulate_unknown_perturbation_is_a_usage_error() {
    let (code, _, stderr) = run(&[
        "simulate", "--model", "smib", "--method", "tm", "--h", "0.01", "--tend", "1",
        "--perturb", "theta:+0.1",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("delta"), "stderr: {stderr}");
}

#[test]
fn simulate_divergent_model_warns_but_emits_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "unstable.json", r#"{"nu":1,"mu":0,"f_x":[[0.5]]}"#);
    let (code, stdout, stderr) = run(&[
        "simulate", "--linear", &path, "--method", "tm", "--h", "0.1", "--tend", "15",
        "--perturb", "x_1:0.1",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 1 + 151);
    assert!(stderr.contains("warning"), "stderr: {stderr}");
}

#[test]
fn export_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("smib.json");
    let (code, _, _) = run(&["export", "--model", "smib", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);

    // Loading the exported file reproduces the built-in analysis.
    let (c1, direct, _) = run(&["analyze", "--model", "smib"]);
    let (c2, via_file, _) = run(&["analyze", "--linear", out.to_str().unwrap()]);
    assert_eq!((c1, c2), (0, 0));
    let a: serde_json::Value = serde_json::from_str(&direct).unwrap();
    let b: serde_json::Value = serde_json::from_str(&via_file).unwrap();
    assert_eq!(a["eigenvalues"], b["eigenvalues"]);
    assert_eq!(a["stiffness_ratio"], b["stiffness_ratio"]);
}

#[test]
fn export_chain_without_coupling_keeps_zero_f_y() {
    let (code, stdout, _) = run(&["export", "--model", "stiff-chain", "--coupling", "0"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["mu"], serde_json::json!(1));
    let f_y = v["f_y"].as_array().unwrap();
    assert_eq!(f_y.len(), 2);
    assert!(f_y.iter().all(|row| row[0] == serde_json::json!(0.0)));
}

#[test]
fn smib_param_overrides_change_the_spectrum() {
    // Zero damping puts the pair on the imaginary axis: unstable per the
    // strict sign test, so the analysis is emitted but the exit code is 2.
    let (code, stdout, _) = run(&["analyze", "--model", "smib", "--param", "D=0"]);
    assert_eq!(code, 2);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["eigenvalues"][0]["re"], serde_json::json!(0.0));
    assert_eq!(v["unstable"], serde_json::json!(true));

    let (code, _, stderr) = run(&["analyze", "--model", "smib", "--param", "Q=1"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("unknown smib parameter"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    for args in [
        vec!["analyze", "--model", "smib"],
        vec![
            "sweep", "--model", "smib", "--method", "heun:2", "--hmin", "1e-4", "--hmax",
            "1e-1", "--hpoints", "7",
        ],
        vec![
            "hmax", "--model", "smib", "--method", "tm", "--hmin", "1e-3", "--hmax", "0.5",
            "--hpoints", "10", "--eps-s", "5", "--eps-p", "5",
        ],
    ] {
        let (c1, first, _) = run(&args);
        let (c2, second, _) = run(&args);
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(first, second, "args: {args:?}");
    }
}
