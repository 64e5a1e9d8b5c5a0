use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tto_core::pipeline::{self, resolve_out_dir, RunConfig, REPORT_DIR_ENV};

/// Transmission topology optimization: substation splits and line
/// switching searched under DC N-1 screening, confirmed with AC power flow.
#[derive(Debug, Parser)]
#[command(name = "tto", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the action space and PTDF, writing the action cache if configured.
    Import(RunArgs),
    /// Run import, DC search and AC validation, then write reports.
    Optimize(RunArgs),
    /// Recompute the report tables from an existing validation log.
    Report {
        /// Report directory holding validation_log.jsonl and baseline.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Grid JSON file; overrides `grid` in the config.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Total wall-clock budget; overrides `budget.total_seconds`.
    #[arg(long)]
    budget_seconds: Option<f64>,
    /// Report directory; takes precedence over the environment and config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = pipeline::load_config(self.config.as_deref())
            .with_context(|| format!("loading config {:?}", self.config))?;
        if let Some(g) = self.grid {
            cfg.grid = Some(g);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = self.budget_seconds {
            cfg.budget.total_seconds = b;
        }
        let env = std::env::var(REPORT_DIR_ENV).ok();
        cfg.out_dir = resolve_out_dir(&cfg.out_dir, env.as_deref(), self.out.as_deref());
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Import(args) => {
            let cfg = args.into_config()?;
            let summary = pipeline::run_import(&cfg)?;
            println!("{}", summary_text(&summary));
            Ok(true)
        }
        Command::Optimize(args) => {
            let cfg = args.into_config()?;
            let report = pipeline::run_pipeline(&cfg)?;
            let agg = &report.aggregates;
            println!(
                "evaluations {} | validated {} | accepted {} | pre AC overload {:.3} MW | best accepted {}",
                report.evaluations,
                agg.records,
                agg.accepted,
                report.baseline.ac_lambda_o,
                agg.best_accepted_lambda_o
                    .map_or_else(|| "-".to_string(), |v| format!("{v:.3} MW")),
            );
            println!("reports written to {}", report.out_dir.display());
            Ok(report.success)
        }
        Command::Report { out } => {
            let env = std::env::var(REPORT_DIR_ENV).ok();
            let dir = resolve_out_dir(&RunConfig::default().out_dir, env.as_deref(), out.as_deref());
            let agg = pipeline::regenerate(&dir)
                .with_context(|| format!("regenerating reports in {}", dir.display()))?;
            let baseline = pipeline::read_baseline(&dir)?;
            println!("{} records, {} accepted", agg.records, agg.accepted);
            Ok(agg.accepted > 0 || baseline.ac_lambda_o == 0.0)
        }
    }
}

fn summary_text(summary: &pipeline::ImportSummary) -> String {
    format!(
        "grid {}\nactions {}\ndisconnectable branches {}\nsplittable stations {}\ncache {}\nseconds {:.3}",
        summary.grid_hash,
        summary.actions,
        summary.disconnectables,
        summary.splittable_stations,
        if summary.cache_hit { "hit" } else { "miss" },
        summary.seconds,
    )
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
