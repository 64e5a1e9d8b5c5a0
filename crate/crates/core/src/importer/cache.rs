//! On-disk cache of import results keyed by grid content.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_action_set, ActionSet, ImportConfig};
use crate::grid::GridModel;
use crate::ptdf::{build_ptdf, PtdfMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportArtifacts {
    /// Content hash of the grid the artifacts were built from.
    pub grid_hash: String,
    pub config: ImportConfig,
    pub actions: ActionSet,
    pub ptdf: PtdfMatrix,
}

impl ImportArtifacts {
    pub fn build(grid: &GridModel, config: &ImportConfig) -> Result<Self> {
        Ok(ImportArtifacts {
            grid_hash: grid.content_hash(),
            config: *config,
            actions: build_action_set(grid, config),
            ptdf: build_ptdf(grid)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a cache file; `Ok(None)` when it is missing, unreadable as
    /// artifacts, or was built for a different grid or config.
    pub fn load_matching(path: &Path, grid: &GridModel, config: &ImportConfig) -> Result<Option<Self>> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let Ok(cached) = serde_json::from_str::<ImportArtifacts>(&text) else {
            return Ok(None);
        };
        let fits = cached.grid_hash == grid.content_hash()
            && cached.config == *config
            && cached.ptdf.node_count == grid.node_count()
            && cached.ptdf.branch_count == grid.branch_count();
        Ok(fits.then_some(cached))
    }
}

/// Returns cached artifacts when the cache matches, otherwise imports and
/// writes the cache. The flag reports a cache hit.
pub fn load_or_import(
    grid: &GridModel,
    config: &ImportConfig,
    cache: Option<&Path>,
) -> Result<(ImportArtifacts, bool)> {
    if let Some(path) = cache {
        if let Some(hit) = ImportArtifacts::load_matching(path, grid, config)? {
            return Ok((hit, true));
        }
    }
    let built = ImportArtifacts::build(grid, config)?;
    if let Some(path) = cache {
        built.save(path)?;
    }
    Ok((built, false))
}
