//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ac::AcConfig;
use crate::dc::DcConfig;
use crate::importer::ImportConfig;
use crate::qd::QdConfig;
use crate::{Error, Result};

/// Environment variable that overrides the report directory.
pub const REPORT_DIR_ENV: &str = "TTO_REPORT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    /// Wall-clock budget for the whole run.
    pub total_seconds: f64,
    /// DC stage budget; default 3/8 of what remains after import.
    pub dc_seconds: Option<f64>,
    /// AC stage budget after the DC stage; default 5/8 of what remains.
    pub ac_seconds: Option<f64>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            total_seconds: 900.0,
            dc_seconds: None,
            ac_seconds: None,
        }
    }
}

/// Stage budgets resolved against the time import actually took.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageBudgets {
    pub dc_seconds: f64,
    pub ac_seconds: f64,
}

impl BudgetConfig {
    pub fn resolve(&self, import_seconds: f64) -> StageBudgets {
        let remaining = (self.total_seconds - import_seconds).max(0.0);
        StageBudgets {
            dc_seconds: self.dc_seconds.unwrap_or(remaining * 3.0 / 8.0),
            ac_seconds: self.ac_seconds.unwrap_or(remaining * 5.0 / 8.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Option<PathBuf>,
    /// Import cache file; import always runs when unset.
    pub action_cache: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Master seed; the search, validator and import seeds derive from it.
    pub seed: u64,
    pub budget: BudgetConfig,
    pub import: ImportConfig,
    pub qd: QdConfig,
    pub dc: DcConfig,
    pub ac: AcConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: None,
            action_cache: None,
            out_dir: PathBuf::from("reports"),
            seed: 0,
            budget: BudgetConfig::default(),
            import: ImportConfig::default(),
            qd: QdConfig::default(),
            dc: DcConfig::default(),
            ac: AcConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(g) = cfg.grid.as_mut() {
            anchor(g);
        }
        if let Some(c) = cfg.action_cache.as_mut() {
            anchor(c);
        }
        anchor(&mut cfg.out_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.budget;
        if !(b.total_seconds.is_finite() && b.total_seconds >= 0.0) {
            return Err(Error::Config("total_seconds must be a non-negative number".into()));
        }
        let stages = b.dc_seconds.unwrap_or(0.0) + b.ac_seconds.unwrap_or(0.0);
        if b.dc_seconds.is_some_and(|s| s < 0.0) || b.ac_seconds.is_some_and(|s| s < 0.0) {
            return Err(Error::Config("stage budgets must be non-negative".into()));
        }
        if stages > b.total_seconds {
            return Err(Error::Config("stage budgets exceed total_seconds".into()));
        }
        if self.import.cap == 0 {
            return Err(Error::Config("import cap must be positive".into()));
        }
        self.qd.validate()
    }

    /// Pushes the master seed into the stage configs.
    pub fn seeded(&self) -> Self {
        let mut cfg = self.clone();
        cfg.import.seed = crate::rng::derive_seed(self.seed, &[1]);
        cfg.qd.seed = crate::rng::derive_seed(self.seed, &[2]);
        cfg.ac.seed = crate::rng::derive_seed(self.seed, &[3]);
        cfg
    }
}

/// Report directory precedence: command-line flag, then environment, then
/// config file.
pub fn resolve_out_dir(config: &Path, env: Option<&str>, flag: Option<&Path>) -> PathBuf {
    match (flag, env.filter(|e| !e.is_empty())) {
        (Some(f), _) => f.to_path_buf(),
        (None, Some(e)) => PathBuf::from(e),
        (None, None) => config.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::from_toml_str("seed = 5\n[qd]\nbatch_size = 8\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.qd.batch_size, 8);
        assert_eq!(cfg.qd.iters_per_epoch, 500);
        assert_eq!(cfg.dc.worst_k, 20);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml_str("sede = 5"), Err(Error::Config(_))));
    }

    #[test]
    fn default_split_is_three_to_five() {
        let b = BudgetConfig {
            total_seconds: 90.0,
            ..BudgetConfig::default()
        };
        let s = b.resolve(10.0);
        assert_eq!((s.dc_seconds, s.ac_seconds), (30.0, 50.0));
    }

    #[test]
    fn out_dir_precedence() {
        let cfg = Path::new("cfg");
        assert_eq!(resolve_out_dir(cfg, None, None), PathBuf::from("cfg"));
        assert_eq!(resolve_out_dir(cfg, Some("env"), None), PathBuf::from("env"));
        assert_eq!(resolve_out_dir(cfg, Some("env"), Some(Path::new("flag"))), PathBuf::from("flag"));
    }

    #[test]
    fn oversized_stage_budgets_fail() {
        let mut cfg = RunConfig::default();
        cfg.budget.total_seconds = 10.0;
        cfg.budget.dc_seconds = Some(8.0);
        cfg.budget.ac_seconds = Some(8.0);
        assert!(cfg.validate().is_err());
    }
}
