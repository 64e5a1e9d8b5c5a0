use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn tto(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tto"));
    cmd.args(args).env_remove("TTO_REPORT_DIR");
    if let Some(dir) = env_out {
        cmd.env("TTO_REPORT_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, grid: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "grid = {:?}\naction_cache = \"cache/import.json\"\nout_dir = \"from-config\"\nseed = 5\n\n\
         [budget]\ntotal_seconds = 30.0\n\n[qd]\nbatch_size = 32\niters_per_epoch = 10\nmax_evaluations = 961\n",
        fixture(grid)
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn import_writes_and_then_hits_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ieee14.json");
    let first = tto(&["import", "--config", cfg.to_str().unwrap()], None);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(String::from_utf8_lossy(&first.stdout).contains("cache miss"));
    assert!(dir.path().join("cache/import.json").exists());
    let second = tto(&["import", "--config", cfg.to_str().unwrap()], None);
    assert!(String::from_utf8_lossy(&second.stdout).contains("cache hit"));
}

#[test]
fn optimize_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ieee14_congested.json");
    let out = dir.path().join("flag-out");
    let run = tto(
        &["optimize", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "7"],
        Some(&dir.path().join("env-out")),
    );
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out.join("heatmap_overload.csv").exists());
    assert!(!dir.path().join("env-out").exists());
    assert!(!dir.path().join("from-config").exists());

    let heatmap = std::fs::read(out.join("heatmap_overload.csv")).unwrap();
    std::fs::remove_file(out.join("heatmap_overload.csv")).unwrap();
    let again = tto(&["report", "--out", out.to_str().unwrap()], None);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(out.join("heatmap_overload.csv")).unwrap(), heatmap);
}

#[test]
fn environment_overrides_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ieee14.json");
    let env_out = dir.path().join("env-out");
    let run = tto(&["optimize", "--config", cfg.to_str().unwrap(), "--budget-seconds", "10"], Some(&env_out));
    // no overloads to begin with counts as success
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(env_out.join("run.json").exists());
    let run_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(env_out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_json["config"]["budget"]["total_seconds"], 10.0);
}

#[test]
fn missing_grid_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tto(
        &["optimize", "--grid", dir.path().join("nope.json").to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("import stage failed"));
}
