use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mrgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrgd")).args(args).output().expect("binary runs")
}

fn repo_config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

fn write_config(dir: &TempDir, body: &str) -> String {
    let path = dir.path().join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn out_dir(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn run_ok(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let out_s = out.to_string_lossy();
    let mut args = vec![cmd, "--config", config, "--out", &out_s];
    args.extend_from_slice(extra);
    let output = mrgd(&args);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    output
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader.records().map(|r| r.unwrap().iter().map(str::to_owned).collect()).collect()
}

const TOY: &str = r#"
seed = 11

[data]
group_dims = [1, 1]
scales = [1.0, 0.1]
samples = 10
"#;

const TWO_GROUP_SPECTRUM: &str = r#"
[spectrum]
eigenvalues = [1.0, 0.9, 0.001, 0.0009]

[schedule]
eta = 2.0
outer = 200
"#;

#[test]
fn generate_writes_data_sidecar_and_manifest() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, TOY);
    let out = out_dir(&dir, "toy");
    run_ok("generate", &config, &out, &[]);

    let rows = csv_rows(&out.join("data.csv"));
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.len() == 3));
    let sidecar = read_json(&out.join("data.json"));
    assert_eq!(sidecar["seed"], 11);
    assert_eq!(sidecar["dim"], 2);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, TOY);
    let a = out_dir(&dir, "a");
    let b = out_dir(&dir, "b");
    run_ok("generate", &config, &a, &["--seed", "12"]);
    run_ok("generate", &config, &b, &[]);
    assert_eq!(read_json(&a.join("data.json"))["seed"], 12);
    assert_ne!(fs::read(a.join("data.csv")).unwrap(), fs::read(b.join("data.csv")).unwrap());
}

#[test]
fn increasing_scales_are_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "[data]\ngroup_dims = [2, 2]\nscales = [0.1, 1.0]\nsamples = 10\n");
    let out = mrgd(&["generate", "--config", &config, "--out", &out_dir(&dir, "x").to_string_lossy()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn schedule_for_two_groups() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, TWO_GROUP_SPECTRUM);
    let out = out_dir(&dir, "schedule");
    run_ok("schedule", &config, &out, &[]);
    let schedule = read_json(&out.join("schedule.json"));
    let etas: Vec<f64> = serde_json::from_value(schedule["etas"].clone()).unwrap();
    let counts: Vec<usize> = serde_json::from_value(schedule["counts"].clone()).unwrap();
    assert!((etas[0] - 0.5).abs() < 1e-12 && (etas[1] - 500.0).abs() < 1e-9);
    assert_eq!(counts, vec![12, 1]);
    let bound = schedule["contraction_bound"].as_f64().unwrap();
    assert!((bound - 0.5470373397350313).abs() < 1e-12);
}

#[test]
fn single_group_needs_one_step() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "[spectrum]\neigenvalues = [1.0, 0.8, 0.5]\n");
    let out = out_dir(&dir, "single");
    run_ok("schedule", &config, &out, &[]);
    let schedule = read_json(&out.join("schedule.json"));
    assert_eq!(schedule["counts"], serde_json::json!([1]));
}

#[test]
fn overshooting_rate_is_numerical_error_naming_the_pair() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        "[spectrum]\neigenvalues = [1.0, 0.9, 0.001, 0.0009]\n\n[schedule]\netas = [1.5, 500.0]\n",
    );
    let out = mrgd(&["schedule", "--config", &config, "--out", &out_dir(&dir, "bad").to_string_lossy()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(i=0, j=1)"));
}

#[test]
fn solve_error_is_bounded_by_residual() {
    let dir = TempDir::new().unwrap();
    let body = format!("{TWO_GROUP_SPECTRUM}\n[solver]\ntol = 1e-12\n");
    let config = write_config(&dir, &body);
    let out = out_dir(&dir, "solve");
    run_ok("solve", &config, &out, &[]);
    let mut reader = csv::Reader::from_path(out.join("mrgd.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>().join(","), "step,outer,scale,inner,residual,error,grad_evals");
    let sigma_min = 0.0009;
    let mut last_residual = f64::INFINITY;
    for record in reader.records() {
        let record = record.unwrap();
        let residual: f64 = record[4].parse().unwrap();
        let error: f64 = record[5].parse().unwrap();
        // The bound is tight on the slowest direction; allow rounding in Aθ − g.
        assert!(error * sigma_min <= residual + 1e-14, "step {}: {error} vs {residual}", &record[0]);
        last_residual = residual;
    }
    assert!(last_residual <= 1e-12);
    assert_eq!(read_json(&out.join("summary.json"))["result"]["converged"], true);
}

#[test]
fn two_scale_benchmark_speedup() {
    let dir = TempDir::new().unwrap();
    let config = repo_config("two_scale.toml");
    let out = out_dir(&dir, "bench");
    run_ok("benchmark", &config, &out, &[]);
    assert!(out.join("mrgd.csv").exists() && out.join("gd.csv").exists());
    let summary = read_json(&out.join("summary.json"));
    let evals = |name: &str| {
        summary["methods"].as_array().unwrap().iter().find(|m| m["method"] == name).unwrap()["grad_evals_to_tol"]
            .as_u64()
            .unwrap()
    };
    assert!(evals("mrgd") * 10 <= evals("gd"), "mrgd {} gd {}", evals("mrgd"), evals("gd"));
}

#[test]
fn three_scale_benchmark_reports_both_methods() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "bench3");
    run_ok("benchmark", &repo_config("three_scale.toml"), &out, &[]);
    let summary = read_json(&out.join("summary.json"));
    let names: Vec<&str> = summary["methods"].as_array().unwrap().iter().map(|m| m["method"].as_str().unwrap()).collect();
    assert!(names.contains(&"mrgd") && names.contains(&"gd"));
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let body = r#"
seed = 4

[data]
group_dims = [8, 4]
scales = [1.0, 0.0316227766016838]
samples = 500

[spectrum]
group_sizes = [8, 4]

[schedule]
eta = 2.0
outer = 400

[solver]
methods = ["mrgd", "gd", "nesterov", "cg"]
gd_lr = 0.5
"#;
    let config = write_config(&dir, body);
    let a = out_dir(&dir, "a");
    let b = out_dir(&dir, "b");
    let c = out_dir(&dir, "c");
    run_ok("benchmark", &config, &a, &["--deterministic"]);
    run_ok("benchmark", &config, &b, &["--deterministic"]);
    run_ok("benchmark", &config, &c, &["--jobs", "2"]);
    for name in ["mrgd.csv", "gd.csv", "nesterov.csv", "cg.csv", "summary.json"] {
        let reference = fs::read(a.join(name)).unwrap();
        assert_eq!(reference, fs::read(b.join(name)).unwrap(), "{name} differs across deterministic runs");
        assert_eq!(reference, fs::read(c.join(name)).unwrap(), "{name} differs with parallel jobs");
    }
}

#[test]
fn probe_checks_pass() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "probe");
    run_ok("probe", &repo_config("probe.toml"), &out, &[]);
    let probe = read_json(&out.join("probe.json"));
    let pass = probe["pass"].as_object().unwrap();
    assert!(!pass.is_empty());
    for (check, ok) in pass {
        assert_eq!(ok, &Value::Bool(true), "{check}");
    }
    for file in ["first_layer_scaling.csv", "softmax_scaling.csv", "expansion.csv", "perturbation.csv"] {
        assert!(out.join(file).exists(), "{file}");
    }
}

#[test]
fn probe_without_data_lists_missing_keys() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "[probe]\nchecks = [\"scaling\"]\n");
    let out = mrgd(&["probe", "--config", &config, "--out", &out_dir(&dir, "p").to_string_lossy()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing keys"));
}

#[test]
fn unknown_config_key_is_validation_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "[schedule]\nrate = 2.0\n");
    let out = mrgd(&["schedule", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_io_error() {
    let out = mrgd(&["schedule", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(4));
}
