//! Preprocessing: disconnectable branches, substation actions and the base
//! PTDF matrix.

mod actions;
mod cache;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::grid::GridModel;
use crate::par;

pub use actions::{
    enumerate_station_actions, split_edges, validate_action_islanding, Action, DEFAULT_CAP, MAX_BUSBARS,
};
pub use cache::{load_or_import, ImportArtifacts};
pub use crate::ptdf::{build_ptdf, PtdfMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportConfig {
    /// Per-station candidate cap before uniform down-sampling.
    pub cap: usize,
    /// Seed for the down-sampling RNG.
    pub seed: u64,
}

impl Default for ImportConfig {
    fn default() -> Self {
        ImportConfig {
            cap: DEFAULT_CAP,
            seed: 0,
        }
    }
}

/// The optimization action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    pub actions: Vec<Action>,
    /// Branch indices eligible for disconnection, ascending.
    pub disconnectables: Vec<usize>,
    /// Contiguous action-id range per substation (indexed like
    /// [`GridModel::substations`]).
    pub station_ranges: Vec<Range<usize>>,
}

impl ActionSet {
    pub fn empty(station_count: usize) -> Self {
        ActionSet {
            actions: Vec::new(),
            disconnectables: Vec::new(),
            station_ranges: vec![0..0; station_count],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty() && self.disconnectables.is_empty()
    }

    /// Substation of action `a`.
    pub fn station_of(&self, a: usize) -> usize {
        self.actions[a].substation
    }

    pub fn actions_of(&self, station: usize) -> Range<usize> {
        self.station_ranges[station].clone()
    }

    /// Stations that have at least one action.
    pub fn splittable_stations(&self) -> Vec<usize> {
        (0..self.station_ranges.len())
            .filter(|&s| !self.station_ranges[s].is_empty())
            .collect()
    }
}

/// Bridge edges of `graph` restricted to the enabled edges.
pub fn find_bridges(graph: &Graph, enabled: &[bool]) -> Vec<usize> {
    graph.bridges(enabled)
}

/// Branches whose removal keeps the grid connected in the base case and
/// under every contingency.
pub fn enumerate_disconnectables(grid: &GridModel) -> Vec<usize> {
    let graph = grid.graph();
    let base = grid.in_service_mask();
    let mut eligible = base.clone();
    let mut strike = |mask: &[bool]| {
        for b in graph.bridges(mask) {
            eligible[b] = false;
        }
    };
    strike(&base);
    for c in &grid.contingencies {
        let mut mask = base.clone();
        for &b in &c.branches {
            mask[b] = false;
        }
        strike(&mask);
    }
    (0..grid.branch_count()).filter(|&b| eligible[b]).collect()
}

/// Enumerates every station, filters islanding splits and assembles the
/// action set. Stations are processed in parallel and merged in station order.
pub fn build_action_set(grid: &GridModel, config: &ImportConfig) -> ActionSet {
    let per_station: Vec<Vec<Action>> = par::map_indices(grid.substations.len(), |s| {
        enumerate_station_actions(&grid.substations[s], s, config.cap, config.seed)
            .into_iter()
            .filter(|a| validate_action_islanding(grid, a))
            .collect()
    });
    let mut actions = Vec::new();
    let mut station_ranges = Vec::with_capacity(per_station.len());
    for list in per_station {
        let start = actions.len();
        actions.extend(list);
        station_ranges.push(start..actions.len());
    }
    ActionSet {
        actions,
        disconnectables: enumerate_disconnectables(grid),
        station_ranges,
    }
}
