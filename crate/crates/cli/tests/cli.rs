use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const WINDOW: &str = r#"
[weight]
p = 0.0
lambda = 2.0

[kernels]
gamma = { variant = "uniform_window", delta = 1.0 }

[dynamics]
kind = "gbm"
mu = 0.05
sigma = 0.2

[simulation]
dt = 0.015625
paths = 200
seed = 3

[task]
n = 16
"#;

fn sdde(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdde"))
        .args(args)
        .env_remove("SDDE_OUTPUT_DIR")
        .current_dir(dir)
        .output()
        .expect("spawn sdde")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), config).unwrap();
    dir
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn project_window_tails_match_norm() {
    let dir = setup(WINDOW);
    let out = sdde(&["project", "exp.toml", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("o/project_gamma.csv"));
    assert_eq!(rows.len(), 17);
    // Window height 1 on [−1, 0) with p = 0: ‖γ‖² = 1, and e⁰ carries nothing.
    assert!((rows[0][2] - 1.0).abs() < 1e-9);
    assert_eq!(rows[0][1], 0.0);
    for (k, r) in rows.iter().enumerate().skip(1) {
        let expect = rows[k - 1][2] - r[1] * r[1];
        assert!((r[2] - expect).abs() < 1e-12);
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/project_gamma.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["task"], "project");
    assert_eq!(meta["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn basis_first_function_at_zero() {
    let dir = setup(WINDOW);
    let out = sdde(&["basis", "exp.toml", "--out", "b"], dir.path());
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("b/basis.csv"));
    let last = rows.last().unwrap();
    assert_eq!(last[0], 0.0);
    // p₀ = λ − p = 2.
    assert!((last[1] - 2.0f64.sqrt() * 2.0f64.sqrt()).abs() < 1e-12);
}

#[test]
fn inadmissible_lambda_is_a_config_error() {
    let dir = setup(&WINDOW.replace("lambda = 2.0", "lambda = 0.0"));
    let out = sdde(&["project", "exp.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lambda > max{p, p/2}"), "{err}");
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = setup(&WINDOW.replace("seed = 3", "seed = 3\nsed = 4"));
    let out = sdde(&["simulate", "exp.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exp.toml"));
}

#[test]
fn run_requires_task_kind() {
    let dir = setup(WINDOW);
    let out = sdde(&["run", "exp.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = setup(WINDOW);
    for o in ["a", "b"] {
        let out = sdde(&["error-scan", "exp.toml", "--out", o], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    // The resolved config records the output directory, so it is left out.
    for f in ["error_scan.csv", "error_scan.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let out = sdde(&["error-scan", "exp.toml", "--out", "c", "--seed", "4"], dir.path());
    assert!(out.status.success());
    assert_ne!(
        fs::read(dir.path().join("a/error_scan.csv")).unwrap(),
        fs::read(dir.path().join("c/error_scan.csv")).unwrap()
    );
}

#[test]
fn default_output_directory_and_env_override() {
    let dir = setup(WINDOW);
    let out = sdde(&["basis", "exp.toml"], dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("sdde-out/basis.csv").exists());
    let out = Command::new(env!("CARGO_BIN_EXE_sdde"))
        .args(["basis", "exp.toml"])
        .env("SDDE_OUTPUT_DIR", "from-env")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/basis.csv").exists());
}
