//! Report aggregation and file output.
//!
//! Every table is a pure function of the validation log plus the baseline,
//! so `tto report` can regenerate them without rerunning anything.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ac::{Reason, ValidationRecord};
use crate::qd::TracePoint;
use crate::{Error, Result};

pub const HEATMAP_FILE: &str = "heatmap_overload.csv";
pub const COUNTS_FILE: &str = "accepted_counts.csv";
pub const REJECTIONS_FILE: &str = "rejections.csv";
pub const TRACE_FILE: &str = "fitness_trace.csv";
pub const RUN_FILE: &str = "run.json";
pub const LOG_FILE: &str = "validation_log.jsonl";
pub const BASELINE_FILE: &str = "baseline.json";

/// Pre-optimization reference values and the table shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub dc_fitness: f64,
    pub dc_lambda_o: f64,
    pub ac_lambda_o: f64,
    pub ac_critical: usize,
    pub ac_base_converged: bool,
    /// Highest split count shown (rows `0..=max_splits`).
    pub max_splits: usize,
    /// Highest disconnection count shown (columns `0..=max_disconnections`).
    pub max_disconnections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Best accepted AC overload per (splits, disconnections); the origin
    /// holds the pre-optimization value.
    pub heatmap: Vec<Vec<Option<f64>>>,
    pub accepted_counts: Vec<Vec<usize>>,
    /// Share of all records per verdict, in percent; `accepted` first.
    pub rejection_percent: Vec<(String, f64)>,
    pub records: usize,
    pub accepted: usize,
    pub best_accepted_lambda_o: Option<f64>,
}

pub fn aggregate(records: &[ValidationRecord], baseline: &Baseline) -> Aggregates {
    let rows = baseline.max_splits + 1;
    let cols = baseline.max_disconnections + 1;
    let mut heatmap = vec![vec![None; cols]; rows];
    let mut counts = vec![vec![0usize; cols]; rows];
    heatmap[0][0] = Some(baseline.ac_lambda_o);
    let mut accepted = 0;
    let mut best: Option<f64> = None;
    for r in records.iter().filter(|r| r.accepted()) {
        accepted += 1;
        let (s, d) = (r.dc.lambda_s.min(rows - 1), r.dc.lambda_d.min(cols - 1));
        counts[s][d] += 1;
        if let Some(v) = r.ac_lambda_o {
            let cell = &mut heatmap[s][d];
            *cell = Some(cell.map_or(v, |c: f64| c.min(v)));
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    let total = records.len();
    let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
    let mut rejection_percent = vec![("accepted".to_string(), pct(accepted))];
    for reason in Reason::ALL {
        let n = records.iter().filter(|r| r.reason() == Some(reason)).count();
        rejection_percent.push((reason.as_str().to_string(), pct(n)));
    }
    Aggregates {
        heatmap,
        accepted_counts: counts,
        rejection_percent,
        records: total,
        accepted,
        best_accepted_lambda_o: best,
    }
}

fn header(cols: usize) -> String {
    let mut h = String::from("lambda_s/lambda_d");
    for d in 0..cols {
        let _ = write!(h, ",{d}");
    }
    h.push('\n');
    h
}

pub fn heatmap_csv(agg: &Aggregates) -> String {
    let cols = agg.heatmap.first().map_or(0, Vec::len);
    let mut out = header(cols);
    for (s, row) in agg.heatmap.iter().enumerate() {
        let _ = write!(out, "{s}");
        for cell in row {
            match cell {
                Some(v) => {
                    let _ = write!(out, ",{v:.3}");
                }
                None => out.push_str(",-"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn counts_csv(agg: &Aggregates) -> String {
    let cols = agg.accepted_counts.first().map_or(0, Vec::len);
    let mut out = header(cols);
    for (s, row) in agg.accepted_counts.iter().enumerate() {
        let _ = write!(out, "{s}");
        for n in row {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
    }
    out
}

pub fn rejections_csv(agg: &Aggregates) -> String {
    let mut out = String::from("reason,percent\n");
    for (reason, p) in &agg.rejection_percent {
        let _ = writeln!(out, "{reason},{p:.3}");
    }
    out
}

pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("evaluations,best_fitness\n");
    for t in trace {
        let _ = writeln!(out, "{},{:.6}", t.evaluations, t.best_fitness);
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_log(dir: &Path, records: &[ValidationRecord]) -> Result<()> {
    let path = dir.join(LOG_FILE);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

pub fn read_log(dir: &Path) -> Result<Vec<ValidationRecord>> {
    let path = dir.join(LOG_FILE);
    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_baseline(dir: &Path, baseline: &Baseline) -> Result<()> {
    write_file(dir, BASELINE_FILE, &to_json(baseline)?)
}

pub fn read_baseline(dir: &Path) -> Result<Baseline> {
    let path = dir.join(BASELINE_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes the three aggregate tables.
pub fn write_tables(dir: &Path, agg: &Aggregates) -> Result<()> {
    write_file(dir, HEATMAP_FILE, &heatmap_csv(agg))?;
    write_file(dir, COUNTS_FILE, &counts_csv(agg))?;
    write_file(dir, REJECTIONS_FILE, &rejections_csv(agg))
}

pub fn write_trace(dir: &Path, trace: &[TracePoint]) -> Result<()> {
    write_file(dir, TRACE_FILE, &trace_csv(trace))
}

pub fn write_run_json(dir: &Path, value: &serde_json::Value) -> Result<()> {
    write_file(dir, RUN_FILE, &to_json(value)?)
}

/// Rebuilds the tables from `validation_log.jsonl` and `baseline.json`.
pub fn regenerate(dir: &Path) -> Result<Aggregates> {
    let records = read_log(dir)?;
    let baseline = read_baseline(dir)?;
    let agg = aggregate(&records, &baseline);
    write_tables(dir, &agg)?;
    Ok(agg)
}
