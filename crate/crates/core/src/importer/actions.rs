//! Substation split enumeration and node-breaker realization.

use std::collections::HashSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::grid::{Element, GridModel, Substation};

/// Default per-station candidate cap.
pub const DEFAULT_CAP: usize = 1 << 23;

/// Largest busbar count for which colorings are enumerated exhaustively.
pub const MAX_BUSBARS: usize = 16;

/// One two-node configuration of a substation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    /// Index into [`GridModel::substations`].
    pub substation: usize,
    /// Grid node the station expands.
    pub node: usize,
    /// Group (0 or 1) per terminal; terminal 0 is always in group 0.
    pub partition: Vec<u8>,
    /// Busbar per terminal realizing the partition.
    pub busbar_assignment: Vec<usize>,
    /// Couplers (indices into the station's coupler list) opened.
    pub open_couplers: Vec<usize>,
    /// Terminals moved off their default busbar.
    pub reassignment: usize,
}

impl Action {
    pub fn in_group_one(&self, terminal: usize) -> bool {
        self.partition[terminal] == 1
    }
}

/// A busbar 2-coloring whose sides are both coupler-connected.
#[derive(Debug, Clone)]
struct Coloring {
    open_couplers: Vec<usize>,
    /// Per terminal, per side: busbar to use and whether it is a reassignment.
    choice: Vec<[Option<(usize, bool)>; 2]>,
}

fn side_connected(station: &Substation, mask: u32, side: u32) -> bool {
    let on_side = |b: usize| (mask >> b) & 1 == side;
    let members: Vec<usize> = (0..station.busbars.len()).filter(|&b| on_side(b)).collect();
    let Some(&first) = members.first() else {
        return false;
    };
    let graph = Graph::new(station.busbars.len(), station.couplers.clone());
    let enabled: Vec<bool> = station
        .couplers
        .iter()
        .map(|&(a, b)| on_side(a) && on_side(b))
        .collect();
    let labels = graph.components(&enabled);
    members.iter().all(|&b| labels[b] == labels[first])
}

fn valid_colorings(station: &Substation) -> Vec<Coloring> {
    let nb = station.busbars.len();
    let full = (1u32 << nb) - 1;
    (1..full)
        .filter(|&mask| side_connected(station, mask, 0) && side_connected(station, mask, 1))
        .map(|mask| {
            let side = |b: usize| ((mask >> b) & 1) as usize;
            let open_couplers = station
                .couplers
                .iter()
                .enumerate()
                .filter(|(_, &(a, b))| side(a) != side(b))
                .map(|(i, _)| i)
                .collect();
            let choice = station
                .terminals
                .iter()
                .map(|t| {
                    let pick = |s: usize| {
                        if side(t.default_busbar) == s {
                            Some((t.default_busbar, false))
                        } else {
                            t.reachable.iter().find(|&&b| side(b) == s).map(|&b| (b, true))
                        }
                    };
                    [pick(0), pick(1)]
                })
                .collect();
            Coloring {
                open_couplers,
                choice,
            }
        })
        .collect()
}

/// Cheapest realization of a terminal bipartition, or `None` when every
/// busbar coloring strands some terminal.
fn realize<'c>(colorings: &'c [Coloring], groups: &[u8]) -> Option<(&'c Coloring, Vec<usize>, usize)> {
    let mut best: Option<(&Coloring, usize)> = None;
    'colorings: for c in colorings {
        let mut cost = 0;
        for (t, &g) in groups.iter().enumerate() {
            match c.choice[t][g as usize] {
                Some((_, moved)) => cost += moved as usize,
                None => continue 'colorings,
            }
        }
        if best.is_none_or(|(_, b)| cost < b) {
            best = Some((c, cost));
        }
    }
    best.map(|(c, cost)| {
        let assignment = groups
            .iter()
            .enumerate()
            .map(|(t, &g)| c.choice[t][g as usize].expect("checked above").0)
            .collect();
        (c, assignment, cost)
    })
}

/// Enumerates the electrically distinct two-node splits of one station.
///
/// Bipartitions pin terminal 0 to group 0. When more than `cap` candidates
/// exist a uniform sample of `cap` is drawn with the seeded RNG. Candidates
/// with no node-breaker realization are dropped. Returns an empty list for
/// stations that cannot be split.
pub fn enumerate_station_actions(
    station: &Substation,
    station_index: usize,
    cap: usize,
    seed: u64,
) -> Vec<Action> {
    let t = station.terminals.len();
    if station.busbars.len() < 2 || station.busbars.len() > MAX_BUSBARS || !(2..=64).contains(&t) {
        return Vec::new();
    }
    let colorings = valid_colorings(station);
    if colorings.is_empty() {
        return Vec::new();
    }
    let count = (1usize << (t - 1)) - 1;
    let masks: Vec<u64> = if count > cap {
        let mut rng = crate::rng::stream(seed, &[station_index as u64]);
        let mut picked: Vec<u64> = index::sample(&mut rng, count, cap)
            .into_iter()
            .map(|i| i as u64 + 1)
            .collect();
        picked.sort_unstable();
        picked
    } else {
        (1..=count as u64).collect()
    };

    let element_key = |e: Element| match e {
        Element::Branch(b) => (0u8, b),
        Element::Injection(i) => (1u8, i),
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut groups = vec![0u8; t];
    for mask in masks {
        for (k, g) in groups.iter_mut().enumerate().skip(1) {
            *g = ((mask >> (k - 1)) & 1) as u8;
        }
        let mut key: Vec<(u8, usize)> = (0..t)
            .filter(|&k| groups[k] == 1)
            .map(|k| element_key(station.terminals[k].element))
            .collect();
        key.sort_unstable();
        if !seen.insert(key) {
            continue;
        }
        if let Some((coloring, busbar_assignment, reassignment)) = realize(&colorings, &groups) {
            out.push(Action {
                substation: station_index,
                node: station.node,
                partition: groups.clone(),
                busbar_assignment,
                open_couplers: coloring.open_couplers.clone(),
                reassignment,
            });
        }
    }
    out
}

/// Bus/branch edge list after applying one split: branch ends in group 1
/// move to a new node with index `grid.node_count()`.
pub fn split_edges(grid: &GridModel, action: &Action) -> Vec<(usize, usize)> {
    let station = &grid.substations[action.substation];
    let new_node = grid.node_count();
    let mut edges: Vec<(usize, usize)> = grid.branches.iter().map(|b| (b.from, b.to)).collect();
    for (k, term) in station.terminals.iter().enumerate() {
        if let Element::Branch(b) = term.element {
            if action.in_group_one(k) {
                let (from, to) = &mut edges[b];
                if *from == station.node {
                    *from = new_node;
                } else {
                    *to = new_node;
                }
            }
        }
    }
    edges
}

/// Accepts the split iff the bus/branch graph stays connected in the base
/// case and under every listed contingency.
pub fn validate_action_islanding(grid: &GridModel, action: &Action) -> bool {
    let graph = Graph::new(grid.node_count() + 1, split_edges(grid, action));
    let base = grid.in_service_mask();
    if !graph.is_connected(&base) {
        return false;
    }
    let bridges: HashSet<usize> = graph.bridges(&base).into_iter().collect();
    grid.contingencies.iter().all(|c| match c.branches.as_slice() {
        [] => true,
        [single] => !base[*single] || !bridges.contains(single),
        many => {
            let mut mask = base.clone();
            for &b in many {
                mask[b] = false;
            }
            graph.is_connected(&mask)
        }
    })
}
