use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pmeans(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmeans")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const TWO_ATOMS: &str = "manifold = \"circle\"\n[measure]\natoms = [[0.0], [0.4]]\n[anneal]\nt_end = 30.0\nn_runs = 30\n";

#[test]
fn missing_config_exits_2() {
    let out = pmeans(&["anneal", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config: file not found"));
}

#[test]
fn bad_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_ATOMS);
    let out = pmeans(&["anneal", &cfg, "--set", "anneal.h_max=-0.1", "--dry-run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("h_max"));
    let out = pmeans(&["oracle", &cfg, "--set", "manifold=\"klein\""]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifold"));
}

#[test]
fn dry_run_resolves_auto_k_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_ATOMS);
    let out_dir = dir.path().join("out");
    let out = pmeans(&["anneal", &cfg, "--dry-run", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let k_line = text.lines().find(|l| l.starts_with("k = ")).expect("k printed");
    let k: f64 = k_line[4..].parse().unwrap();
    assert!((k - (1.1 * 0.08 + 0.1)).abs() < 1e-3, "{k}");
    assert!(!out_dir.exists());
}

#[test]
fn anneal_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_ATOMS);
    let out_dir = dir.path().join("out");
    let out = pmeans(&["anneal", &cfg, "--out", out_dir.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["runs_000.csv", "runs_029.csv", "ensemble.json", "hitrate.svg"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let report = json(&out_dir.join("ensemble.json"));
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["n_runs"], 30);
    assert!(report["config"]["anneal"]["k"].is_f64());
    let csv = std::fs::read_to_string(out_dir.join("runs_000.csv")).unwrap();
    assert!(csv.starts_with("t,theta_1,y_1,beta,s,jumps\n"));
}

#[test]
fn oracle_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[[0.0], [0.4]]", Some(0.2), false),
        ("[[0.3]]", Some(0.3), false),
        ("[[0.0], [0.5]]", None, true),
    ];
    for (i, (atoms, argmin, ambiguous)) in cases.into_iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("manifold = \"circle\"\n[measure]\natoms = {atoms}\n"));
        let out_dir = dir.path().join(format!("o{i}"));
        let out = pmeans(&["oracle", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        let report = json(&out_dir.join("oracle.json"));
        assert_eq!(report["ambiguous"], ambiguous, "{atoms}");
        if let Some(x) = argmin {
            assert!((report["argmin"][0].as_f64().unwrap() - x).abs() < 1e-6, "{atoms}");
        }
        assert!(out_dir.join("landscape.csv").exists());
    }
}

#[test]
fn landscape_reports_elevation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_ATOMS);
    let out_dir = dir.path().join("l");
    assert!(pmeans(&["landscape", &cfg, "--out", out_dir.to_str().unwrap()]).status.success());
    let report = json(&out_dir.join("elevation.json"));
    assert!((report["c_u"].as_f64().unwrap() - 0.08).abs() < 1e-3);
    let single = write_config(dir.path(), "manifold = \"circle\"\n[measure]\natoms = [[0.1]]\n");
    let out_dir = dir.path().join("s");
    assert!(pmeans(&["landscape", &single, "--out", out_dir.to_str().unwrap()]).status.success());
    assert_eq!(json(&out_dir.join("elevation.json"))["c_u"].as_f64().unwrap(), 0.0);
}

#[test]
fn lemma2_default_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_ATOMS);
    let out_dir = dir.path().join("m");
    let out = pmeans(&["lemma2", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out_dir.join("lemma2.json"));
    assert!(report["max_discrepancy"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn empirical_writes_process_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("atoms.csv"), "0.0\n0.4\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "manifold = \"circle\"\n[measure]\ncsv = \"atoms.csv\"\n[landscape]\nresolution = 512\n[empirical]\nn_max = 15\ntrials = 10\nprobe_points = 2\np = 1\n",
    );
    // unknown key inside [empirical] is rejected
    assert_eq!(pmeans(&["empirical", &cfg]).status.code(), Some(2));
    let cfg = write_config(
        dir.path(),
        "manifold = \"circle\"\np = 1.0\n[measure]\ncsv = \"atoms.csv\"\n[landscape]\nresolution = 512\n[empirical]\nn_max = 15\ntrials = 10\nprobe_points = 2\n",
    );
    let out_dir = dir.path().join("e");
    let out = pmeans(&["empirical", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let csv = std::fs::read_to_string(out_dir.join("mean_process_000.csv")).unwrap();
    assert!(csv.starts_with("n,e_1,H_value,gap,basin_id\n"));
    assert_eq!(csv.lines().count(), 16);
    let report = json(&out_dir.join("empirical.json"));
    assert_eq!(report["probe"]["trials"], 10);
    assert!(report["probe"]["warning"].is_string());
}
