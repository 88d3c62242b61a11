//! End-to-end tests of the binary: exit codes, validation messages, summary
//! lines, and CSV/JSON shapes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mastergeo"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn ising_model(dir: &Path) -> std::path::PathBuf {
    write(dir, "ising.json", r#"{"type":"ising"}"#)
}

#[test]
fn simulate_primary_master_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "cfg.json",
        r#"{
            "model": {"type": "ising"},
            "mode": "primary-master",
            "theta": [1.0],
            "initial": {"distribution": [1.0, 0.0]},
            "t_max": 10.0,
            "dt": 0.001,
            "output": "OUT"
        }"#,
    );
    let out = dir.path().join("run.csv");
    let result = bin()
        .arg("simulate")
        .arg(&config)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", stderr(&result));

    let summary = stdout(&result);
    assert!(summary.contains("mode=primary-master"), "{summary}");
    let kl: f64 = summary
        .split("final_kl=")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(kl <= 1e-8, "final kl {kl}");
    let rate: f64 = summary
        .split("fitted_rate=")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((rate + 1.0).abs() <= 1e-3, "rate {rate}");

    // Column layout of the master CSV.
    let csv = std::fs::read_to_string(&out).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "t,p_+1,p_-1,obs_1,psi_noneq,cross_entropy,kl");
    assert_eq!(csv.lines().count(), 10_002);
}

#[test]
fn simulate_contact_on_manifold_start() {
    let dir = tempfile::tempdir().unwrap();
    // y = tanh(1), z = ln(2 cosh 1): a point on the attractor.
    let config = write(
        dir.path(),
        "cfg.json",
        &format!(
            r#"{{
                "model": {{"type": "ising"}},
                "mode": "contact-psi",
                "theta": [1.0],
                "initial": {{"y": [{}], "z": {}}},
                "t_max": 1.0,
                "dt": 0.01,
                "output": "OUT"
            }}"#,
            1.0f64.tanh(),
            (2.0 * 1.0f64.cosh()).ln()
        ),
    );
    let out = dir.path().join("flow.csv");
    let result = bin()
        .arg("simulate")
        .arg(&config)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", stderr(&result));

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x_1,y_1,z,h,length");
    for line in lines {
        let h: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!(h.abs() <= 1e-12, "off-manifold h {h}");
    }
}

#[test]
fn simulate_moment_modes_write_expected_headers() {
    let dir = tempfile::tempdir().unwrap();
    let primary = write(
        dir.path(),
        "primary.json",
        r#"{
            "model": {"type": "ising"},
            "mode": "primary-moments",
            "theta": [1.0],
            "initial": {"moments": [0.0], "psi": 0.0},
            "t_max": 1.0,
            "dt": 0.01,
            "output": "OUT"
        }"#,
    );
    let out = dir.path().join("pm.csv");
    let result = bin()
        .arg("simulate")
        .arg(&primary)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", stderr(&result));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("t,theta_1,moment_1,psi\n"));
    assert!(stdout(&result).contains("final_abs_h="));

    let dual = write(
        dir.path(),
        "dual.json",
        r#"{
            "model": {"type": "ising"},
            "mode": "dual-moments",
            "eta": [0.5],
            "initial": {"theta_avg": [0.0], "h": 0.0},
            "t_max": 1.0,
            "dt": 0.01,
            "output": "OUT"
        }"#,
    );
    let out = dir.path().join("dm.csv");
    let result = bin()
        .arg("simulate")
        .arg(&dual)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", stderr(&result));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("t,eta_1,theta_avg_1,H\n"));
}

#[test]
fn simulate_validation_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();

    // dt > t_max.
    let bad_grid = write(
        dir.path(),
        "grid.json",
        r#"{"model": {"type": "ising"}, "mode": "primary-master", "theta": [1.0],
            "t_max": 0.5, "dt": 1.0, "output": "x.csv"}"#,
    );
    let result = bin().arg("simulate").arg(&bad_grid).output().unwrap();
    assert_eq!(result.status.code(), Some(1));
    assert!(stderr(&result).contains("dt"), "{}", stderr(&result));

    // Missing theta.
    let no_theta = write(
        dir.path(),
        "theta.json",
        r#"{"model": {"type": "ising"}, "mode": "primary-master",
            "t_max": 1.0, "dt": 0.1, "output": "x.csv"}"#,
    );
    let result = bin().arg("simulate").arg(&no_theta).output().unwrap();
    assert_eq!(result.status.code(), Some(1));
    assert!(stderr(&result).contains("theta"), "{}", stderr(&result));

    // Invalid distribution, named field.
    let bad_dist = write(
        dir.path(),
        "dist.json",
        r#"{"model": {"type": "ising"}, "mode": "primary-master", "theta": [1.0],
            "initial": {"distribution": [0.7, 0.7]},
            "t_max": 1.0, "dt": 0.1, "output": "x.csv"}"#,
    );
    let result = bin().arg("simulate").arg(&bad_dist).output().unwrap();
    assert_eq!(result.status.code(), Some(1));
    assert!(
        stderr(&result).contains("initial.distribution"),
        "{}",
        stderr(&result)
    );

    // Missing output path.
    let no_output = write(
        dir.path(),
        "output.json",
        r#"{"model": {"type": "ising"}, "mode": "primary-master", "theta": [1.0],
            "t_max": 1.0, "dt": 0.1}"#,
    );
    let result = bin().arg("simulate").arg(&no_output).output().unwrap();
    assert_eq!(result.status.code(), Some(1));
    assert!(stderr(&result).contains("output"), "{}", stderr(&result));
}

#[test]
fn simulate_flag_overrides_change_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "cfg.json",
        r#"{"model": {"type": "ising"}, "mode": "primary-master", "theta": [0.5],
            "t_max": 10.0, "dt": 0.001, "seed": 1, "output": "x.csv"}"#,
    );
    let out = dir.path().join("short.csv");
    let result = bin()
        .arg("simulate")
        .arg(&config)
        .args(["--t-max", "1.0", "--dt", "0.5"])
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", stderr(&result));
    assert!(stdout(&result).contains("rows=3"), "{}", stdout(&result));

    // Different seeds give different random starts.
    let out_a = dir.path().join("seed_a.csv");
    let out_b = dir.path().join("seed_b.csv");
    for (seed, path) in [("3", &out_a), ("4", &out_b)] {
        let result = bin()
            .arg("simulate")
            .arg(&config)
            .args(["--seed", seed])
            .arg("--output")
            .arg(path)
            .output()
            .unwrap();
        assert!(result.status.success());
    }
    assert_ne!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap()
    );
}

#[test]
fn geometry_reports_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let model = ising_model(dir.path());
    let result = bin()
        .arg("geometry")
        .arg(&model)
        .args(["--theta", "1.0"])
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", stderr(&result));
    let report: serde_json::Value = serde_json::from_str(&stdout(&result)).unwrap();
    assert!((report["psi_eq"].as_f64().unwrap() - 1.126_928_011_042_972_5).abs() < 1e-9);
    assert!((report["fisher"][0][0].as_f64().unwrap() - 0.419_974_341_614_026).abs() < 1e-9);
    assert!(
        report["ising_reference"]["deviations"]["psi_eq"]
            .as_f64()
            .unwrap()
            .abs()
            < 1e-10
    );

    let result = bin()
        .arg("geometry")
        .arg(&model)
        .args(["--theta", "0.0"])
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout(&result)).unwrap();
    assert_eq!(report["eta"][0].as_f64().unwrap(), 0.0);
    assert_eq!(report["cubic"][0][0][0].as_f64().unwrap(), 0.0);
}

#[test]
fn geometry_rank_deficient_model_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "degenerate.json",
        r#"{"type":"custom","labels":["a","b"],"observables":[[1,-1],[2,-2]]}"#,
    );
    let result = bin()
        .arg("geometry")
        .arg(&model)
        .args(["--theta", "0.1,0.2"])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
    assert!(
        stderr(&result).contains("rank-deficient"),
        "{}",
        stderr(&result)
    );
}

#[test]
fn geometry_requires_exactly_one_coordinate_set() {
    let dir = tempfile::tempdir().unwrap();
    let model = ising_model(dir.path());
    let neither = bin().arg("geometry").arg(&model).output().unwrap();
    assert_eq!(neither.status.code(), Some(1));
    let both = bin()
        .arg("geometry")
        .arg(&model)
        .args(["--theta", "1.0", "--eta", "0.5"])
        .output()
        .unwrap();
    assert_eq!(both.status.code(), Some(1));
}

#[test]
fn verify_all_passes_and_scopes_filter() {
    let all = bin().arg("verify").output().unwrap();
    assert!(all.status.success(), "{}", stdout(&all));
    let text = stdout(&all);
    assert!(text.contains("[PASS] exp_family/"));
    assert!(text.contains("[PASS] contact/length-equals-hamiltonian"));
    assert!(text.lines().filter(|l| l.starts_with("[PASS]")).count() >= 30);
    assert!(text.contains("passed"));

    let master = bin().args(["verify", "master"]).output().unwrap();
    assert!(master.status.success());
    let text = stdout(&master);
    assert!(text.contains("kl-monotonicity"));
    assert!(text.contains("oracle-equivalence"));
    assert!(!text.contains("legendre/"));

    let bogus = bin().args(["verify", "everything"]).output().unwrap();
    assert_eq!(bogus.status.code(), Some(1));
}

#[test]
fn model_file_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "bad.json",
        r#"{"type":"custom","labels":["a","b"],"observables":[[1,2,3]]}"#,
    );
    let result = bin()
        .arg("geometry")
        .arg(&model)
        .args(["--theta", "0.0"])
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(1));
    assert!(
        stderr(&result).contains("observables"),
        "{}",
        stderr(&result)
    );
}
