mod support;

use std::path::Path;

use tto_core::pipeline::{self, RunConfig, COUNTS_FILE, HEATMAP_FILE, REJECTIONS_FILE};

fn config(grid: &str, out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        grid: Some(support::fixture_path(grid)),
        out_dir: out.to_path_buf(),
        seed: 3,
        ..RunConfig::default()
    };
    cfg.budget.total_seconds = 30.0;
    cfg.qd.batch_size = 32;
    cfg.qd.iters_per_epoch = 10;
    cfg.qd.max_evaluations = Some(1 + 32 * 30);
    cfg
}

#[test]
fn overload_free_grid_reports_only_the_origin() {
    let dir = tempfile::tempdir().unwrap();
    let report = pipeline::run_pipeline(&config("ieee14.json", dir.path())).unwrap();
    assert_eq!(report.baseline.ac_lambda_o, 0.0);
    assert_eq!(report.aggregates.accepted, 0);
    assert!(report.success);
    let heatmap = std::fs::read_to_string(dir.path().join(HEATMAP_FILE)).unwrap();
    let cells: Vec<&str> = heatmap.lines().skip(1).flat_map(|l| l.split(',').skip(1)).collect();
    assert_eq!(cells[0], "0.000");
    assert!(cells[1..].iter().all(|c| *c == "-"), "{heatmap}");
}

#[test]
fn tables_are_pure_functions_of_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let report = pipeline::run_pipeline(&config("ieee14_congested.json", dir.path())).unwrap();
    let before: Vec<String> = [HEATMAP_FILE, COUNTS_FILE, REJECTIONS_FILE]
        .iter()
        .map(|f| std::fs::read_to_string(dir.path().join(f)).unwrap())
        .collect();
    for f in [HEATMAP_FILE, COUNTS_FILE, REJECTIONS_FILE] {
        std::fs::remove_file(dir.path().join(f)).unwrap();
    }
    let agg = pipeline::regenerate(dir.path()).unwrap();
    assert_eq!(agg, report.aggregates);
    for (f, old) in [HEATMAP_FILE, COUNTS_FILE, REJECTIONS_FILE].iter().zip(&before) {
        assert_eq!(&std::fs::read_to_string(dir.path().join(f)).unwrap(), old);
    }

    // accounting identities
    let counted: usize = agg.accepted_counts.iter().flatten().sum();
    assert_eq!(counted, agg.accepted);
    let pct: f64 = agg.rejection_percent.iter().map(|r| r.1).sum();
    assert!((pct - 100.0).abs() <= 0.1);
}

#[test]
fn time_budget_stops_the_search_gracefully() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("ieee14_congested.json", dir.path());
    cfg.qd.max_evaluations = None;
    cfg.budget.total_seconds = 2.0;
    let report = pipeline::run_pipeline(&cfg).unwrap();
    let t = &report.timings;
    assert!(t.dc_seconds <= t.budgets.dc_seconds * 1.1 + 0.05, "dc {} of {}", t.dc_seconds, t.budgets.dc_seconds);
    assert!(t.ac_seconds <= t.budgets.ac_seconds * 1.1 + 0.05, "ac {} of {}", t.ac_seconds, t.budgets.ac_seconds);
    assert!(report.evaluations > 1);
    // the final snapshot is never the one dropped
    assert!(t.snapshots_pushed >= 1 && t.snapshots_dropped < t.snapshots_pushed);
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(pipeline::RUN_FILE)).unwrap()).unwrap();
    assert!(run["runtime"]["timings"]["dc_seconds"].is_number());
    assert_eq!(run["totals"]["evaluations"], report.evaluations);
}

#[test]
fn unreadable_grid_names_the_import_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("ieee14.json", dir.path());
    cfg.grid = Some(dir.path().join("missing.json"));
    let err = pipeline::run_pipeline(&cfg).unwrap_err();
    assert!(err.to_string().starts_with("import stage failed"), "{err}");
}
