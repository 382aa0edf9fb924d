use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bdgz_core::quadform::QuadraticForm;
use faer::Mat;
use num_complex::Complex64 as c64;
use tempfile::TempDir;

fn bdgz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdgz"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run bdgz")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let state = dir.join(format!("{name}.bdgz"));
    let text = format!("{body}\n[output]\nstate = {:?}\n", state.to_str().unwrap());
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

const HOMOGENEOUS: &str = r#"
[grid]
points = [128]
lengths = [20.0]

[physics]
g = 0.02
n0 = 1000

[basis]
f = 17
"#;

const IDEAL_HARMONIC: &str = r#"
[grid]
points = [64]
lengths = [16.0]

[trap]
kind = "harmonic"
frequencies = [1.0]

[physics]
g = 0.0
n0 = 1000

[basis]
f = 8
"#;

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr));
    })
}

fn solve(cfg: &Path) -> serde_json::Value {
    let out = bdgz(&["solve", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    json(&out)
}

#[test]
fn homogeneous_chemical_potential_and_spectrum() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "hom", HOMOGENEOUS);
    let summary = solve(&cfg);
    // gN0/V = 0.02 * 1000 / 20
    assert!((summary["mu0"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let out = bdgz(&["spectrum", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["stable"], true);
    let k = 2.0 * std::f64::consts::PI / 20.0;
    let eps = k * k / 2.0;
    let omega = report["modes"][0]["omega"].as_f64().unwrap();
    assert!((omega - (eps * (eps + 2.0)).sqrt()).abs() < 1e-10);
    let zm = &report["zero_mode"];
    assert!((zm["q_eta_p"][1].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn ideal_gas_chemical_potential() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "ideal", IDEAL_HARMONIC);
    let summary = solve(&cfg);
    assert!((summary["mu0"].as_f64().unwrap() - 0.5).abs() < 1e-8);
}

#[test]
fn rerun_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "hom", HOMOGENEOUS);
    solve(&cfg);
    let first = std::fs::read(dir.path().join("hom.bdgz")).unwrap();
    let s1 = bdgz(&["spectrum", "--config", cfg.to_str().unwrap()]);
    solve(&cfg);
    let second = std::fs::read(dir.path().join("hom.bdgz")).unwrap();
    let s2 = bdgz(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(first, second);
    assert_eq!(s1.stdout, s2.stdout);
}

#[test]
fn csv_output_with_zero_mode_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "hom", HOMOGENEOUS);
    solve(&cfg);
    let out = dir.path().join("modes.csv");
    let run = bdgz(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("mode,omega,eta_norm\n"));
    assert_eq!(text.lines().count(), 1 + 16);
    let zm = std::fs::read_to_string(dir.path().join("modes_zero_mode.csv")).unwrap();
    assert!(zm.starts_with("component,p_re,p_im,q_re,q_im\n"));
}

#[test]
fn unstable_form_is_reported_with_structural_status() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "hom", HOMOGENEOUS);
    // |B| > A on the second level: ω² = A² - B² < 0
    let a = Mat::from_fn(2, 2, |i, j| c64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
    let b = Mat::from_fn(2, 2, |i, j| c64::new(if i == 1 && j == 1 { 2.0 } else { 0.0 }, 0.0));
    let q = QuadraticForm::from_matrices(a, b, 1.0, 1.0).unwrap();
    let path = dir.path().join("unstable.json");
    std::fs::write(&path, q.to_json()).unwrap();
    let out = bdgz(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--quadform",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let report = json(&out);
    assert_eq!(report["stable"], false);
    assert_eq!(report["unstable_modes"].as_array().unwrap().len(), 2);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(dir.path(), "bad", &HOMOGENEOUS.replace("f = 17", "f = 0"));
    assert_eq!(bdgz(&["solve", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    let unknown = write_config(dir.path(), "unknown", &HOMOGENEOUS.replace("[basis]", "[basis]\nsize = 3"));
    assert_eq!(bdgz(&["solve", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(bdgz(&["solve", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    // spectrum before solve: no state file
    let cfg = write_config(dir.path(), "hom", HOMOGENEOUS);
    assert_eq!(bdgz(&["spectrum", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn short_zero_mode_truncation_exits_6() {
    let dir = TempDir::new().unwrap();
    let body = format!("{HOMOGENEOUS}\n[vacuum]\nn_max = 60\nzero_mode_n_max = 100\n");
    let cfg = write_config(dir.path(), "hom", &body);
    solve(&cfg);
    let out = bdgz(&["vacuum", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(6));
    assert!(!out.stdout.is_empty());
}

#[test]
fn vacuum_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "hom", HOMOGENEOUS);
    solve(&cfg);
    let out = bdgz(&["vacuum", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("depletion"));
}

#[test]
fn converge_and_oracle_check() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "hom", HOMOGENEOUS);
    solve(&cfg);
    let out = bdgz(&["converge", "--config", cfg.to_str().unwrap(), "--f-list", "5,9,17"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let devs: Vec<f64> = rows.records().map(|r| r.unwrap()[4].parse().unwrap()).collect();
    assert!(!devs.is_empty() && devs.iter().all(|d| *d < 1e-8));

    let out = bdgz(&["oracle-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    for r in rows.records() {
        let dev: f64 = r.unwrap()[3].parse().unwrap();
        assert!(dev < 1e-8);
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "hom", HOMOGENEOUS);
    solve(&cfg);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_bdgz"))
            .args(["spectrum", "--config", cfg.to_str().unwrap()])
            .env("BDGZ_THREADS", threads)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    };
    assert_eq!(run("1").stdout, run("4").stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}
