//! Bus/branch topology induced by a genome.
//!
//! Each split action adds one node (indices `grid.node_count()..`) that
//! receives the station's group-1 terminals; disconnections deactivate
//! branches.

use crate::genome::Genome;
use crate::grid::{balance_at_slack, BusbarOutage, Element, GridModel};
use crate::importer::ActionSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub node_count: usize,
    pub base_node_count: usize,
    /// Current endpoints of every branch.
    pub ends: Vec<(usize, usize)>,
    pub active: Vec<bool>,
    pub injection_node: Vec<usize>,
    /// Action applied at each substation, if any.
    pub station_action: Vec<Option<usize>>,
    /// Node created for each applied action, in genome slot order.
    pub split_nodes: Vec<usize>,
    pub slack: usize,
}

impl Topology {
    pub fn base(grid: &GridModel) -> Self {
        Topology {
            node_count: grid.node_count(),
            base_node_count: grid.node_count(),
            ends: grid.branches.iter().map(|b| (b.from, b.to)).collect(),
            active: grid.in_service_mask(),
            injection_node: grid.injections.iter().map(|i| i.node).collect(),
            station_action: vec![None; grid.substations.len()],
            split_nodes: Vec::new(),
            slack: grid.slack,
        }
    }

    /// Applies the genome's splits and disconnections. The genome is assumed
    /// to satisfy its invariants.
    pub fn from_genome(grid: &GridModel, set: &ActionSet, genome: &Genome) -> Self {
        let mut topo = Topology::base(grid);
        for a in genome.action_ids() {
            let action = &set.actions[a];
            let station = &grid.substations[action.substation];
            let new_node = topo.node_count;
            topo.node_count += 1;
            topo.split_nodes.push(new_node);
            topo.station_action[action.substation] = Some(a);
            for (k, term) in station.terminals.iter().enumerate() {
                if !action.in_group_one(k) {
                    continue;
                }
                match term.element {
                    Element::Branch(b) => {
                        let (from, to) = &mut topo.ends[b];
                        if grid.branches[b].from == station.node {
                            *from = new_node;
                        } else {
                            *to = new_node;
                        }
                    }
                    Element::Injection(i) => topo.injection_node[i] = new_node,
                }
            }
        }
        for d in genome.disconnection_ids() {
            topo.active[set.disconnectables[d]] = false;
        }
        topo
    }

    /// Net injections per node with the listed injections removed; the slack
    /// entry absorbs the residual.
    pub fn injections(&self, grid: &GridModel, removed: &[usize]) -> Vec<f64> {
        let mut p = vec![0.0; self.node_count];
        for (k, inj) in grid.injections.iter().enumerate() {
            if !removed.contains(&k) {
                p[self.injection_node[k]] += inj.p_mw;
            }
        }
        balance_at_slack(&mut p, self.slack);
        p
    }

    /// Branches and injections lost with the outage, under the current
    /// terminal-to-busbar assignment of its station.
    pub fn busbar_outage_elements(
        &self,
        grid: &GridModel,
        set: &ActionSet,
        outage: &BusbarOutage,
    ) -> (Vec<usize>, Vec<usize>) {
        match self.station_action[outage.substation] {
            None => (outage.implied_branches.clone(), outage.implied_injections.clone()),
            Some(a) => grid.substations[outage.substation]
                .tripped_by(outage.busbar, &set.actions[a].busbar_assignment),
        }
    }
}
