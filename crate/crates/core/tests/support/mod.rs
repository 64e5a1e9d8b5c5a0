//! Shared fixtures and independent oracles for the integration tests.
//!
//! Nothing here calls into the flow code under test: the DC oracle builds
//! the susceptance matrix from scratch and solves it with a dense LU.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use tto_core::grid::{
    BranchData, ContingencyData, Element, GridData, InjectionData, InjectionKind, NodeData,
    SubstationData, TerminalData,
};
use tto_core::importer::ActionSet;
use tto_core::{Genome, GridModel};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> GridModel {
    tto_core::grid::load_grid(fixture_path(name)).expect("fixture loads")
}

/// Connected-component label per node over the listed edges.
pub fn components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut label = vec![usize::MAX; n];
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = s;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if label[w] == usize::MAX {
                    label[w] = s;
                    stack.push(w);
                }
            }
        }
    }
    label
}

pub fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let l = components(n, edges);
    l.iter().all(|&c| c == l[0])
}

/// Bus-branch network after applying a genome, derived directly from the
/// action partitions.
#[derive(Debug, Clone)]
pub struct Network {
    pub n: usize,
    pub ends: Vec<(usize, usize)>,
    pub active: Vec<bool>,
    pub injection_node: Vec<usize>,
    pub slack: usize,
}

pub fn network(grid: &GridModel, set: &ActionSet, genome: &Genome) -> Network {
    let mut net = Network {
        n: grid.nodes.len(),
        ends: grid.branches.iter().map(|b| (b.from, b.to)).collect(),
        active: grid.branches.iter().map(|b| b.in_service).collect(),
        injection_node: grid.injections.iter().map(|i| i.node).collect(),
        slack: grid.slack,
    };
    for a in genome.actions.iter().flatten() {
        let action = &set.actions[*a];
        let station = &grid.substations[action.substation];
        let split = net.n;
        net.n += 1;
        for (t, term) in station.terminals.iter().enumerate() {
            if action.partition[t] != 1 {
                continue;
            }
            match term.element {
                Element::Branch(b) => {
                    if grid.branches[b].from == station.node {
                        net.ends[b].0 = split;
                    } else {
                        net.ends[b].1 = split;
                    }
                }
                Element::Injection(i) => net.injection_node[i] = split,
            }
        }
    }
    for d in genome.disconnections.iter().flatten() {
        net.active[set.disconnectables[*d]] = false;
    }
    net
}

/// Full DC solve of `net` with the given branches and injections removed.
/// `None` when a component without the slack carries net injection.
pub fn dc_flows(
    grid: &GridModel,
    net: &Network,
    removed_branches: &[usize],
    removed_injections: &[usize],
) -> Option<Vec<f64>> {
    let n = net.n;
    let on: Vec<bool> = (0..net.ends.len())
        .map(|k| net.active[k] && !removed_branches.contains(&k))
        .collect();
    let mut p = vec![0.0; n];
    for (k, inj) in grid.injections.iter().enumerate() {
        if !removed_injections.contains(&k) {
            p[net.injection_node[k]] += inj.p_mw;
        }
    }
    let others: f64 = (0..n).filter(|&v| v != net.slack).map(|v| p[v]).sum();
    p[net.slack] = -others;

    let live_edges: Vec<(usize, usize)> = (0..on.len()).filter(|&k| on[k]).map(|k| net.ends[k]).collect();
    let label = components(n, &live_edges);
    let mut b = DMatrix::<f64>::zeros(n, n);
    let mut grounded = BTreeSet::new();
    b[(net.slack, net.slack)] += 1.0;
    grounded.insert(label[net.slack]);
    for v in 0..n {
        if grounded.contains(&label[v]) {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&w| label[w] == label[v]).collect();
        if members.iter().any(|&w| p[w].abs() > 1e-9) {
            return None;
        }
        b[(v, v)] += 1.0;
        grounded.insert(label[v]);
    }
    for (k, br) in grid.branches.iter().enumerate() {
        if !on[k] {
            continue;
        }
        let (i, j) = net.ends[k];
        let y = 1.0 / br.reactance;
        b[(i, i)] += y;
        b[(j, j)] += y;
        b[(i, j)] -= y;
        b[(j, i)] -= y;
    }
    let theta = b.lu().solve(&DVector::from_vec(p)).expect("grounded matrix is regular");
    Some(
        grid.branches
            .iter()
            .enumerate()
            .map(|(k, br)| {
                if on[k] {
                    (theta[net.ends[k].0] - theta[net.ends[k].1]) / br.reactance
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// Max |a - b| over max |b|, with the denominator floored at 1 MW.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    diff / scale
}

/// Branches whose removal keeps the base graph and every contingency case
/// connected, found by removing each candidate on top of each case.
pub fn disconnectables_brute_force(grid: &GridModel) -> Vec<usize> {
    let n = grid.nodes.len();
    let mut cases: Vec<Vec<usize>> = vec![Vec::new()];
    cases.extend(grid.contingencies.iter().map(|c| c.branches.clone()));
    (0..grid.branches.len())
        .filter(|&b| grid.branches[b].in_service)
        .filter(|&b| {
            cases.iter().all(|case| {
                let edges: Vec<(usize, usize)> = grid
                    .branches
                    .iter()
                    .enumerate()
                    .filter(|&(k, br)| br.in_service && k != b && !case.contains(&k))
                    .map(|(_, br)| (br.from, br.to))
                    .collect();
                connected(n, &edges)
            })
        })
        .collect()
}

pub struct RandomGridShape {
    pub nodes: usize,
    pub extra_edges: usize,
    pub max_contingencies: usize,
    pub substations: usize,
}

/// Random connected grid with non-islanding contingencies and two-busbar
/// substations whose terminals reach both busbars.
pub fn random_grid<R: Rng>(rng: &mut R, shape: &RandomGridShape) -> GridModel {
    let n = shape.nodes;
    let node_id = |v: usize| format!("n{v}");
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    let mut tries = 0;
    while edges.len() < n - 1 + shape.extra_edges && tries < 10_000 {
        tries += 1;
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
            edges.push((a, b));
        }
    }
    edges.shuffle(rng);

    let branches: Vec<BranchData> = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| BranchData {
            id: format!("l{k}"),
            from: node_id(a),
            to: node_id(b),
            x_pu: rng.random_range(0.02..0.5),
            limit_mw: rng.random_range(20.0..120.0),
            r_pu: 0.0,
            b_pu: 0.0,
            tap: 1.0,
            in_service: true,
        })
        .collect();

    let mut injections = Vec::new();
    for v in 1..n {
        if rng.random_bool(0.6) {
            let p: f64 = rng.random_range(-80.0..80.0);
            let kind = if p >= 0.0 { InjectionKind::Generator } else { InjectionKind::Load };
            injections.push(InjectionData {
                id: format!("i{v}"),
                node: node_id(v),
                p_mw: p,
                q_mvar: 0.0,
                kind,
                v_setpoint_pu: None,
            });
        }
    }
    injections.push(InjectionData {
        id: "i0".into(),
        node: node_id(0),
        p_mw: 0.0,
        q_mvar: 0.0,
        kind: InjectionKind::Generator,
        v_setpoint_pu: None,
    });

    // single and double branch outages that keep the grid connected
    let mut contingencies = Vec::new();
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    for (c, &k) in order.iter().enumerate() {
        if contingencies.len() >= shape.max_contingencies {
            break;
        }
        let mut out = vec![k];
        if c % 4 == 3 {
            out.push(order[(c + 1) % order.len()]);
        }
        out.sort_unstable();
        out.dedup();
        let rest: Vec<(usize, usize)> = (0..edges.len()).filter(|j| !out.contains(j)).map(|j| edges[j]).collect();
        if connected(n, &rest) {
            contingencies.push(ContingencyData {
                id: format!("c{c}"),
                branches: out.iter().map(|&j| format!("l{j}")).collect(),
                injections: Vec::new(),
            });
        }
    }

    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut candidates: Vec<usize> = (0..n).filter(|&v| degree[v] >= 3).collect();
    candidates.shuffle(rng);
    candidates.truncate(shape.substations);
    candidates.sort_unstable();
    let busbars = || vec!["B1".to_string(), "B2".to_string()];
    let substations: Vec<SubstationData> = candidates
        .iter()
        .map(|&v| {
            let mut elements: Vec<String> = edges
                .iter()
                .enumerate()
                .filter(|&(_, &(a, b))| a == v || b == v)
                .map(|(k, _)| format!("l{k}"))
                .collect();
            elements.extend(injections.iter().filter(|i| i.node == node_id(v)).map(|i| i.id.clone()));
            SubstationData {
                node: node_id(v),
                busbars: busbars(),
                couplers: vec![["B1".into(), "B2".into()]],
                terminals: elements
                    .into_iter()
                    .map(|e| TerminalData {
                        element: e,
                        reachable: busbars(),
                        default: if rng.random_bool(0.5) { "B1".into() } else { "B2".into() },
                    })
                    .collect(),
            }
        })
        .collect();

    let data = GridData {
        nodes: (0..n)
            .map(|v| NodeData {
                id: node_id(v),
                substation: None,
                shunt_mvar: 0.0,
            })
            .collect(),
        branches,
        injections,
        contingencies,
        busbar_outages: Vec::new(),
        substations,
        slack: node_id(0),
    };
    GridModel::from_data(data).expect("random grid is valid")
}
