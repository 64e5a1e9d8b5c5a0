//! End-to-end run: import, DC search and AC validation under one budget.
//!
//! The search and the validator run on two threads joined by a bounded
//! [`SnapshotQueue`]. Everything written outside the `runtime` section of
//! `run.json` is a function of the grid, the config and the seed.

mod config;
mod queue;
mod report;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::json;

use crate::ac::{AcBaseline, ValidationRecord, Validator};
use crate::dc::DcEvaluator;
use crate::grid::{load_grid, GridModel};
use crate::importer::{load_or_import, ImportArtifacts};
use crate::qd::{self, TracePoint};
use crate::{Error, Result};

pub use config::{resolve_out_dir, BudgetConfig, RunConfig, StageBudgets, REPORT_DIR_ENV};
pub use queue::{SnapshotQueue, DEFAULT_CAPACITY};
pub use report::{
    aggregate, counts_csv, heatmap_csv, read_baseline, read_log, regenerate, rejections_csv,
    trace_csv, Aggregates, Baseline, BASELINE_FILE, COUNTS_FILE, HEATMAP_FILE, LOG_FILE,
    REJECTIONS_FILE, RUN_FILE, TRACE_FILE,
};

/// Wall-clock measurements; excluded from reproducibility comparisons.
#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub import_seconds: f64,
    pub dc_seconds: f64,
    pub ac_seconds: f64,
    pub total_seconds: f64,
    pub budgets: StageBudgets,
    pub cache_hit: bool,
    pub snapshots_pushed: usize,
    pub snapshots_dropped: usize,
    pub evaluations_per_second: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub baseline: Baseline,
    pub aggregates: Aggregates,
    pub records: Vec<ValidationRecord>,
    pub trace: Vec<TracePoint>,
    pub evaluations: u64,
    pub epochs: usize,
    pub iterations: u64,
    pub timings: Timings,
    /// At least one topology passed AC validation, or there was nothing to fix.
    pub success: bool,
}

/// Summary of an import-only run.
#[derive(Debug, Clone, Serialize)]
pub struct ImportSummary {
    pub grid_hash: String,
    pub actions: usize,
    pub disconnectables: usize,
    pub splittable_stations: usize,
    pub cache_hit: bool,
    pub seconds: f64,
}

fn load_and_import(config: &RunConfig) -> Result<(GridModel, ImportArtifacts, bool)> {
    let path = config
        .grid
        .as_deref()
        .ok_or_else(|| Error::Config("no grid file given".into()))?;
    let grid = load_grid(path).map_err(|e| e.in_stage("import"))?;
    let (artifacts, hit) = load_or_import(&grid, &config.import, config.action_cache.as_deref())
        .map_err(|e| e.in_stage("import"))?;
    Ok((grid, artifacts, hit))
}

/// Runs the import stage alone, filling the action cache if one is set.
pub fn run_import(config: &RunConfig) -> Result<ImportSummary> {
    config.validate()?;
    let config = config.seeded();
    let start = Instant::now();
    let (_, artifacts, cache_hit) = load_and_import(&config)?;
    Ok(ImportSummary {
        grid_hash: artifacts.grid_hash.clone(),
        actions: artifacts.actions.actions.len(),
        disconnectables: artifacts.actions.disconnectables.len(),
        splittable_stations: artifacts.actions.splittable_stations().len(),
        cache_hit,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs the whole pipeline and writes reports into `config.out_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let config = config.seeded();
    let run_start = Instant::now();
    let (grid, artifacts, cache_hit) = load_and_import(&config)?;
    let import_seconds = run_start.elapsed().as_secs_f64();
    let budgets = config.budget.resolve(import_seconds);

    let set = &artifacts.actions;
    let evaluator = DcEvaluator::new(
        &grid,
        set,
        &artifacts.ptdf,
        config.dc.clone(),
        config.qd.n_actions,
        config.qd.n_disconnections,
    )
    .map_err(|e| e.in_stage("dc"))?;
    let pre_fitness = evaluator.pre_score().fitness;

    let dc_start = Instant::now();
    let dc_deadline = dc_start + Duration::from_secs_f64(budgets.dc_seconds);
    let ac_budget = Duration::from_secs_f64(budgets.ac_seconds);
    let ac_deadline = dc_deadline + ac_budget;
    let queue = SnapshotQueue::new(DEFAULT_CAPACITY);

    let (search, dc_end, (ac_baseline, records, ac_end)) = std::thread::scope(|scope| {
        let consumer = scope.spawn(|| {
            let baseline = AcBaseline::compute(&grid, &config.ac.solver);
            let mut validator = Validator::new(&grid, set, &config.ac, &baseline, pre_fitness);
            while let Some(snapshot) = queue.pop() {
                // the final snapshot arrives once the search has stopped
                let deadline = if snapshot.is_final {
                    ac_deadline.min(Instant::now() + ac_budget)
                } else {
                    ac_deadline
                };
                validator.consume(&snapshot, Some(deadline));
            }
            let records = validator.finish();
            (baseline, records, Instant::now())
        });
        let search = if set.is_empty() {
            Ok(None)
        } else {
            qd::run(&evaluator, &config.qd, Some(dc_deadline), |s| queue.push(s)).map(Some)
        };
        let dc_end = Instant::now();
        queue.close();
        let ac = consumer.join().expect("validator thread panicked");
        (search, dc_end, ac)
    });
    let search = search.map_err(|e| e.in_stage("dc"))?;
    let dc_seconds = (dc_end - dc_start).as_secs_f64();
    // validator time beyond the end of the search
    let ac_seconds = ac_end.saturating_duration_since(dc_end).as_secs_f64();

    let pre = evaluator.pre_score();
    let baseline = Baseline {
        dc_fitness: pre.fitness,
        dc_lambda_o: pre.lambda_o,
        ac_lambda_o: ac_baseline.overload.lambda_o,
        ac_critical: ac_baseline.overload.critical,
        ac_base_converged: ac_baseline.base.converged,
        max_splits: config.qd.n_actions,
        max_disconnections: config.qd.n_disconnections,
    };
    let aggregates = aggregate(&records, &baseline);
    let (snapshots_pushed, snapshots_dropped) = queue.stats();
    let (trace, evaluations, epochs, iterations) = match &search {
        Some(s) => (s.trace.clone(), s.evaluations, s.epochs, s.iterations),
        None => (vec![TracePoint { evaluations: 1, best_fitness: pre.fitness }], 1, 0, 0),
    };
    let timings = Timings {
        import_seconds,
        dc_seconds,
        ac_seconds,
        total_seconds: run_start.elapsed().as_secs_f64(),
        budgets,
        cache_hit,
        snapshots_pushed,
        snapshots_dropped,
        evaluations_per_second: if dc_seconds > 0.0 { evaluations as f64 / dc_seconds } else { 0.0 },
    };
    let success = aggregates.accepted > 0 || baseline.ac_lambda_o == 0.0;
    let report = RunReport {
        out_dir: config.out_dir.clone(),
        baseline,
        aggregates,
        records,
        trace,
        evaluations,
        epochs,
        iterations,
        timings,
        success,
    };
    write_reports(&report, &config, &artifacts).map_err(|e| e.in_stage("report"))?;
    Ok(report)
}

fn write_reports(report: &RunReport, config: &RunConfig, artifacts: &ImportArtifacts) -> Result<()> {
    let dir = &report.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    report::write_log(dir, &report.records)?;
    report::write_baseline(dir, &report.baseline)?;
    report::write_tables(dir, &report.aggregates)?;
    report::write_trace(dir, &report.trace)?;
    report::write_run_json(dir, &run_json(report, config, artifacts)?)
}

fn run_json(report: &RunReport, config: &RunConfig, artifacts: &ImportArtifacts) -> Result<serde_json::Value> {
    // the report directory differs between otherwise identical runs
    let mut echo = serde_json::to_value(config).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(map) = echo.as_object_mut() {
        map.remove("out_dir");
    }
    let agg = &report.aggregates;
    Ok(json!({
        "config": echo,
        "grid_hash": artifacts.grid_hash,
        "action_space": {
            "actions": artifacts.actions.actions.len(),
            "disconnectables": artifacts.actions.disconnectables.len(),
        },
        "pre_optimization": report.baseline,
        "totals": {
            "evaluations": report.evaluations,
            "epochs": report.epochs,
            "iterations": report.iterations,
            "validated": agg.records,
            "accepted": agg.accepted,
            "best_accepted_ac_lambda_o": agg.best_accepted_lambda_o,
        },
        "success": report.success,
        "runtime": {
            "out_dir": report.out_dir,
            "timings": report.timings,
            "parallel": crate::par::is_parallel(),
        },
    }))
}

/// Loads the run config, falling back to defaults when no file is given.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}
