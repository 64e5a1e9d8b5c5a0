//! N-1 and busbar-outage screening on a modified topology.

use std::collections::HashSet;

use crate::graph::{Graph, UnionFind};
use crate::grid::GridModel;
use crate::importer::ActionSet;
use crate::topology::Topology;

use super::operator::{incidence, Column, Correction, FlowOperator, DEAD_TOLERANCE, GROUND};

/// Post-screening flows of one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub f_n0: Vec<f64>,
    /// Elementwise max |flow| over the contingency list; zeros when empty.
    pub f_max: Vec<f64>,
    /// Elementwise max |flow| over busbar outages; zeros when none.
    pub f_busbar_max: Vec<f64>,
    /// Overload energy per contingency (the penalty for islanding cases).
    pub case_energy: Vec<f64>,
    pub case_islanded: Vec<bool>,
    pub busbar_energy: Vec<f64>,
    pub busbar_islanded: Vec<bool>,
}

/// One outage: branches and injections removed together.
#[derive(Debug, Clone, Copy)]
pub struct Outage<'a> {
    pub branches: &'a [usize],
    pub injections: &'a [usize],
}

/// Per-topology screening state shared by all outage cases.
pub struct Screener<'a> {
    grid: &'a GridModel,
    topo: &'a Topology,
    op: &'a FlowOperator,
    graph: Graph,
    bridges: HashSet<usize>,
    p: Vec<f64>,
    theta: Vec<f64>,
}

impl<'a> Screener<'a> {
    pub fn new(grid: &'a GridModel, topo: &'a Topology, op: &'a FlowOperator) -> Self {
        let graph = Graph::new(topo.node_count, topo.ends.clone());
        let bridges = graph.bridges(&topo.active).into_iter().collect();
        let p = topo.injections(grid, &[]);
        let theta = op.angles(&p);
        Screener {
            grid,
            topo,
            op,
            graph,
            bridges,
            p,
            theta,
        }
    }

    pub fn base_flows(&self) -> Vec<f64> {
        self.op.flows_from_angles(&self.theta, &[])
    }

    /// Flows after the outage, or `None` if it strands injection.
    pub fn outage_flows(&self, outage: Outage<'_>) -> Option<Vec<f64>> {
        let mut removed: Vec<usize> = outage
            .branches
            .iter()
            .copied()
            .filter(|&b| self.topo.active[b])
            .collect();
        removed.sort_unstable();
        removed.dedup();
        let (p, mut theta) = if outage.injections.is_empty() {
            (None, self.theta.clone())
        } else {
            let p = self.topo.injections(self.grid, outage.injections);
            let theta = self.op.angles(&p);
            (Some(p), theta)
        };
        if removed.is_empty() {
            return Some(self.op.flows_from_angles(&theta, &[]));
        }
        let p = p.as_deref().unwrap_or(&self.p);

        let mut cols: Vec<Column> = Vec::with_capacity(removed.len());
        let mut c = Vec::with_capacity(removed.len());
        for &b in &removed {
            let (i, j) = self.op.ends[b];
            cols.push(incidence(i, j));
            c.push(-self.op.y[b]);
        }
        let may_split = removed.len() > 1 || self.bridges.contains(&removed[0]);
        if may_split {
            for v in self.new_dead_grounds(&removed, p)? {
                cols.push(vec![(v, 1.0)]);
                c.push(GROUND);
            }
        }
        for col in &mut cols {
            col.retain(|&(i, _)| i != self.op.slack);
        }
        let correction = Correction::new(&self.op.x, self.op.n, &cols, &c).ok()?;
        correction.apply(&cols, &mut theta);
        Some(self.op.flows_from_angles(&theta, &removed))
    }

    /// Nodes to ground for components that lose their path to the slack.
    fn new_dead_grounds(&self, removed: &[usize], p: &[f64]) -> Option<Vec<usize>> {
        let n = self.topo.node_count;
        let mut uf = UnionFind::new(n);
        for k in 0..self.graph.edge_count() {
            if self.topo.active[k] && !removed.contains(&k) {
                let (i, j) = self.graph.edge(k);
                uf.union(i, j);
            }
        }
        let slack_root = uf.find(self.topo.slack);
        let mut has_ground = vec![false; n];
        let mut first = vec![usize::MAX; n];
        for v in 0..n {
            let root = uf.find(v);
            if root == slack_root {
                continue;
            }
            if p[v].abs() > DEAD_TOLERANCE {
                return None;
            }
            has_ground[root] |= self.op.grounded[v];
            first[root] = first[root].min(v);
        }
        Some(
            (0..n)
                .filter(|&r| first[r] != usize::MAX && !has_ground[r])
                .map(|r| first[r])
                .collect(),
        )
    }
}

/// Screens the topology against every contingency and busbar outage.
/// `penalty` is the overload energy charged to an outage that islands.
pub fn screen_contingencies(
    grid: &GridModel,
    set: &ActionSet,
    topo: &Topology,
    op: &FlowOperator,
    penalty: f64,
) -> FlowResult {
    let screener = Screener::new(grid, topo, op);
    let f_n0 = screener.base_flows();
    let ne = grid.branch_count();
    let energy = |f: &[f64]| -> f64 {
        f.iter()
            .zip(&grid.branches)
            .map(|(v, b)| (v.abs() - b.limit_mw).max(0.0))
            .sum()
    };
    let fold = |max: &mut [f64], f: &[f64]| {
        for (m, v) in max.iter_mut().zip(f) {
            *m = m.max(v.abs());
        }
    };

    let mut f_max = vec![0.0; ne];
    let mut case_energy = Vec::with_capacity(grid.contingencies.len());
    let mut case_islanded = Vec::with_capacity(grid.contingencies.len());
    for c in &grid.contingencies {
        let outage = Outage {
            branches: &c.branches,
            injections: &c.injections,
        };
        match screener.outage_flows(outage) {
            Some(f) => {
                fold(&mut f_max, &f);
                case_energy.push(energy(&f));
                case_islanded.push(false);
            }
            None => {
                case_energy.push(penalty);
                case_islanded.push(true);
            }
        }
    }

    let mut f_busbar_max = vec![0.0; ne];
    let mut busbar_energy = Vec::with_capacity(grid.busbar_outages.len());
    let mut busbar_islanded = Vec::with_capacity(grid.busbar_outages.len());
    for o in &grid.busbar_outages {
        let (branches, injections) = topo.busbar_outage_elements(grid, set, o);
        let outage = Outage {
            branches: &branches,
            injections: &injections,
        };
        match screener.outage_flows(outage) {
            Some(f) => {
                fold(&mut f_busbar_max, &f);
                busbar_energy.push(energy(&f));
                busbar_islanded.push(false);
            }
            None => {
                busbar_energy.push(penalty);
                busbar_islanded.push(true);
            }
        }
    }

    FlowResult {
        f_n0,
        f_max,
        f_busbar_max,
        case_energy,
        case_islanded,
        busbar_energy,
        busbar_islanded,
    }
}
