//! Bus/branch network model and its JSON exchange format.
//!
//! [`GridData`] mirrors the file one-to-one (string ids); [`GridModel`] is the
//! validated, index-based form every other module works on. A model converts
//! back to [`GridData`] losslessly, so `load -> save -> load` is the identity.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::Graph;
use crate::{Error, Result};

/// System MVA base for per-unit conversion.
pub const BASE_MVA: f64 = 100.0;

fn default_tap() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn is_true(v: &bool) -> bool {
    *v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridData {
    pub nodes: Vec<NodeData>,
    pub branches: Vec<BranchData>,
    #[serde(default)]
    pub injections: Vec<InjectionData>,
    #[serde(default)]
    pub contingencies: Vec<ContingencyData>,
    #[serde(default)]
    pub busbar_outages: Vec<BusbarOutageData>,
    #[serde(default)]
    pub substations: Vec<SubstationData>,
    pub slack: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeData {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substation: Option<String>,
    /// Fixed shunt susceptance in MVAr at 1 pu (AC only).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub shunt_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchData {
    pub id: String,
    pub from: String,
    pub to: String,
    pub x_pu: f64,
    pub limit_mw: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub r_pu: f64,
    /// Total line charging susceptance (AC only).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub b_pu: f64,
    /// Fixed off-nominal ratio at the `from` end (AC only).
    #[serde(default = "default_tap", skip_serializing_if = "is_one")]
    pub tap: f64,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub in_service: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionKind {
    Generator,
    Load,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionData {
    pub id: String,
    pub node: String,
    /// Signed active injection; generation positive, consumption negative.
    pub p_mw: f64,
    pub q_mvar: f64,
    pub kind: InjectionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_setpoint_pu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContingencyData {
    pub id: String,
    #[serde(default)]
    pub branches: Vec<String>,
    #[serde(default)]
    pub injections: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusbarOutageData {
    pub id: String,
    /// Node id of the expanded substation.
    pub substation: String,
    pub busbar: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstationData {
    pub node: String,
    pub busbars: Vec<String>,
    #[serde(default)]
    pub couplers: Vec<[String; 2]>,
    pub terminals: Vec<TerminalData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalData {
    pub element: String,
    pub reachable: Vec<String>,
    pub default: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub substation: Option<String>,
    pub shunt_mvar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub reactance: f64,
    pub resistance: f64,
    pub charging: f64,
    pub tap: f64,
    pub limit_mw: f64,
    pub in_service: bool,
}

impl Branch {
    pub fn susceptance(&self) -> f64 {
        1.0 / self.reactance
    }

    pub fn other_end(&self, node: usize) -> usize {
        if self.from == node {
            self.to
        } else {
            self.from
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub id: String,
    pub node: usize,
    pub p_mw: f64,
    pub q_mvar: f64,
    pub kind: InjectionKind,
    pub v_setpoint: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    pub id: String,
    pub branches: Vec<usize>,
    pub injections: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusbarOutage {
    pub id: String,
    /// Index into [`GridModel::substations`].
    pub substation: usize,
    /// Busbar index within that substation.
    pub busbar: usize,
    /// Branches tripped by the outage under the default assignment.
    pub implied_branches: Vec<usize>,
    pub implied_injections: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Element {
    Branch(usize),
    Injection(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    pub element: Element,
    /// Busbar indices reachable through disconnectors, ascending.
    pub reachable: Vec<usize>,
    pub default_busbar: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Substation {
    pub node: usize,
    pub busbars: Vec<String>,
    pub couplers: Vec<(usize, usize)>,
    pub terminals: Vec<Terminal>,
}

impl Substation {
    pub fn default_assignment(&self) -> Vec<usize> {
        self.terminals.iter().map(|t| t.default_busbar).collect()
    }

    /// Elements tripped when `busbar` fails, given a terminal-to-busbar map.
    pub fn tripped_by(&self, busbar: usize, assignment: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut branches = Vec::new();
        let mut injections = Vec::new();
        for (t, &bb) in self.terminals.iter().zip(assignment) {
            if bb != busbar {
                continue;
            }
            match t.element {
                Element::Branch(b) => branches.push(b),
                Element::Injection(i) => injections.push(i),
            }
        }
        branches.sort_unstable();
        injections.sort_unstable();
        (branches, injections)
    }
}

/// Validated grid. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    pub nodes: Vec<Node>,
    pub branches: Vec<Branch>,
    pub injections: Vec<Injection>,
    pub contingencies: Vec<Contingency>,
    pub busbar_outages: Vec<BusbarOutage>,
    pub substations: Vec<Substation>,
    pub slack: usize,
    node_index: HashMap<String, usize>,
    branch_index: HashMap<String, usize>,
    injection_index: HashMap<String, usize>,
    node_branches: Vec<Vec<usize>>,
    node_injections: Vec<Vec<usize>>,
    node_substation: Vec<Option<usize>>,
}

/// Reads and validates a grid file.
pub fn load_grid(path: impl AsRef<Path>) -> Result<GridModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GridModel::from_json_str(&text)
}

fn index_of(
    map: &HashMap<String, usize>,
    id: &str,
    what: &str,
    context: impl FnOnce() -> String,
) -> Result<usize> {
    map.get(id)
        .copied()
        .ok_or_else(|| Error::Validation(format!("{}: unknown {what} `{id}`", context())))
}

fn finite(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Validation(format!("{} is not finite", what())))
    }
}

fn unique_index<'a>(ids: impl Iterator<Item = &'a str>, what: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.to_string(), i).is_some() {
            return Err(Error::Validation(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(map)
}

impl GridModel {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let data: GridData = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_data(data)
    }

    pub fn from_data(data: GridData) -> Result<Self> {
        let node_index = unique_index(data.nodes.iter().map(|n| n.id.as_str()), "node")?;
        let branch_index = unique_index(data.branches.iter().map(|b| b.id.as_str()), "branch")?;
        let injection_index =
            unique_index(data.injections.iter().map(|i| i.id.as_str()), "injection")?;
        if let Some(id) = injection_index.keys().find(|id| branch_index.contains_key(*id)) {
            return Err(Error::Validation(format!(
                "id `{id}` is used by both a branch and an injection"
            )));
        }

        let nodes: Vec<Node> = data
            .nodes
            .iter()
            .map(|n| {
                Ok(Node {
                    id: n.id.clone(),
                    substation: n.substation.clone(),
                    shunt_mvar: finite(n.shunt_mvar, || format!("node `{}` shunt", n.id))?,
                })
            })
            .collect::<Result<_>>()?;

        let mut branches = Vec::with_capacity(data.branches.len());
        for b in &data.branches {
            let ctx = || format!("branch `{}`", b.id);
            let from = index_of(&node_index, &b.from, "node", ctx)?;
            let to = index_of(&node_index, &b.to, "node", ctx)?;
            if from == to {
                return Err(Error::Validation(format!("{}: both ends at node `{}`", ctx(), b.from)));
            }
            let reactance = finite(b.x_pu, || format!("{} reactance", ctx()))?;
            if reactance <= 0.0 {
                return Err(Error::Validation(format!("{}: reactance must be > 0", ctx())));
            }
            let limit_mw = finite(b.limit_mw, || format!("{} limit", ctx()))?;
            if limit_mw <= 0.0 {
                return Err(Error::Validation(format!("{}: flow limit must be > 0", ctx())));
            }
            let tap = finite(b.tap, || format!("{} tap", ctx()))?;
            if tap <= 0.0 {
                return Err(Error::Validation(format!("{}: tap ratio must be > 0", ctx())));
            }
            branches.push(Branch {
                id: b.id.clone(),
                from,
                to,
                reactance,
                resistance: finite(b.r_pu, || format!("{} resistance", ctx()))?,
                charging: finite(b.b_pu, || format!("{} charging", ctx()))?,
                tap,
                limit_mw,
                in_service: b.in_service,
            });
        }

        let mut injections = Vec::with_capacity(data.injections.len());
        for i in &data.injections {
            let ctx = || format!("injection `{}`", i.id);
            let node = index_of(&node_index, &i.node, "node", ctx)?;
            if i.kind == InjectionKind::Load && i.v_setpoint_pu.is_some() {
                return Err(Error::Validation(format!("{}: loads carry no voltage setpoint", ctx())));
            }
            if let Some(v) = i.v_setpoint_pu {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Validation(format!("{}: bad voltage setpoint", ctx())));
                }
            }
            injections.push(Injection {
                id: i.id.clone(),
                node,
                p_mw: finite(i.p_mw, || format!("{} p", ctx()))?,
                q_mvar: finite(i.q_mvar, || format!("{} q", ctx()))?,
                kind: i.kind,
                v_setpoint: i.v_setpoint_pu,
            });
        }

        let slack = index_of(&node_index, &data.slack, "node", || "slack".to_string())?;

        let mut node_branches = vec![Vec::new(); nodes.len()];
        for (k, b) in branches.iter().enumerate() {
            node_branches[b.from].push(k);
            node_branches[b.to].push(k);
        }
        let mut node_injections = vec![Vec::new(); nodes.len()];
        for (k, i) in injections.iter().enumerate() {
            node_injections[i.node].push(k);
        }

        let graph = Graph::new(nodes.len(), branches.iter().map(|b| (b.from, b.to)).collect());
        let in_service: Vec<bool> = branches.iter().map(|b| b.in_service).collect();
        if !graph.is_connected(&in_service) {
            return Err(Error::Validation("base-case grid is not connected".into()));
        }

        let mut contingencies = Vec::with_capacity(data.contingencies.len());
        for c in &data.contingencies {
            let ctx = || format!("contingency `{}`", c.id);
            let cb = c
                .branches
                .iter()
                .map(|id| index_of(&branch_index, id, "branch", ctx))
                .collect::<Result<Vec<_>>>()?;
            let ci = c
                .injections
                .iter()
                .map(|id| index_of(&injection_index, id, "injection", ctx))
                .collect::<Result<Vec<_>>>()?;
            if cb.is_empty() && ci.is_empty() {
                return Err(Error::Validation(format!("{}: removes nothing", ctx())));
            }
            let mut mask = in_service.clone();
            for &b in &cb {
                mask[b] = false;
            }
            if !graph.is_connected(&mask) {
                return Err(Error::IslandedContingency(c.id.clone()));
            }
            contingencies.push(Contingency {
                id: c.id.clone(),
                branches: cb,
                injections: ci,
            });
        }

        let mut node_substation = vec![None; nodes.len()];
        let mut substations = Vec::with_capacity(data.substations.len());
        for (si, s) in data.substations.iter().enumerate() {
            let station = build_substation(
                s,
                &node_index,
                &branch_index,
                &injection_index,
                &branches,
                &node_branches,
                &node_injections,
            )?;
            if node_substation[station.node].replace(si).is_some() {
                return Err(Error::Validation(format!(
                    "node `{}` has more than one substation detail",
                    s.node
                )));
            }
            substations.push(station);
        }

        let mut busbar_outages = Vec::with_capacity(data.busbar_outages.len());
        for o in &data.busbar_outages {
            let ctx = || format!("busbar outage `{}`", o.id);
            let node = index_of(&node_index, &o.substation, "node", ctx)?;
            let si = node_substation[node].ok_or_else(|| {
                Error::Validation(format!("{}: node `{}` has no substation detail", ctx(), o.substation))
            })?;
            let station = &substations[si];
            let busbar = station
                .busbars
                .iter()
                .position(|b| *b == o.busbar)
                .ok_or_else(|| Error::Validation(format!("{}: unknown busbar `{}`", ctx(), o.busbar)))?;
            let (implied_branches, implied_injections) =
                station.tripped_by(busbar, &station.default_assignment());
            busbar_outages.push(BusbarOutage {
                id: o.id.clone(),
                substation: si,
                busbar,
                implied_branches,
                implied_injections,
            });
        }

        Ok(GridModel {
            nodes,
            branches,
            injections,
            contingencies,
            busbar_outages,
            substations,
            slack,
            node_index,
            branch_index,
            injection_index,
            node_branches,
            node_injections,
            node_substation,
        })
    }

    /// Converts back to the file representation.
    pub fn to_data(&self) -> GridData {
        let node_id = |i: usize| self.nodes[i].id.clone();
        let element_id = |e: Element| match e {
            Element::Branch(b) => self.branches[b].id.clone(),
            Element::Injection(i) => self.injections[i].id.clone(),
        };
        GridData {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeData {
                    id: n.id.clone(),
                    substation: n.substation.clone(),
                    shunt_mvar: n.shunt_mvar,
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchData {
                    id: b.id.clone(),
                    from: node_id(b.from),
                    to: node_id(b.to),
                    x_pu: b.reactance,
                    limit_mw: b.limit_mw,
                    r_pu: b.resistance,
                    b_pu: b.charging,
                    tap: b.tap,
                    in_service: b.in_service,
                })
                .collect(),
            injections: self
                .injections
                .iter()
                .map(|i| InjectionData {
                    id: i.id.clone(),
                    node: node_id(i.node),
                    p_mw: i.p_mw,
                    q_mvar: i.q_mvar,
                    kind: i.kind,
                    v_setpoint_pu: i.v_setpoint,
                })
                .collect(),
            contingencies: self
                .contingencies
                .iter()
                .map(|c| ContingencyData {
                    id: c.id.clone(),
                    branches: c.branches.iter().map(|&b| self.branches[b].id.clone()).collect(),
                    injections: c.injections.iter().map(|&i| self.injections[i].id.clone()).collect(),
                })
                .collect(),
            busbar_outages: self
                .busbar_outages
                .iter()
                .map(|o| BusbarOutageData {
                    id: o.id.clone(),
                    substation: node_id(self.substations[o.substation].node),
                    busbar: self.substations[o.substation].busbars[o.busbar].clone(),
                })
                .collect(),
            substations: self
                .substations
                .iter()
                .map(|s| SubstationData {
                    node: node_id(s.node),
                    busbars: s.busbars.clone(),
                    couplers: s
                        .couplers
                        .iter()
                        .map(|&(a, b)| [s.busbars[a].clone(), s.busbars[b].clone()])
                        .collect(),
                    terminals: s
                        .terminals
                        .iter()
                        .map(|t| TerminalData {
                            element: element_id(t.element),
                            reachable: t.reachable.iter().map(|&b| s.busbars[b].clone()).collect(),
                            default: s.busbars[t.default_busbar].clone(),
                        })
                        .collect(),
                })
                .collect(),
            slack: node_id(self.slack),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_data()).expect("grid data serializes")
    }

    /// SHA-256 over the canonical serialization; keys the action cache.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.to_data()).expect("grid data serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn node_id(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn branch_id(&self, id: &str) -> Option<usize> {
        self.branch_index.get(id).copied()
    }

    pub fn injection_id(&self, id: &str) -> Option<usize> {
        self.injection_index.get(id).copied()
    }

    pub fn branches_at(&self, node: usize) -> &[usize] {
        &self.node_branches[node]
    }

    pub fn injections_at(&self, node: usize) -> &[usize] {
        &self.node_injections[node]
    }

    pub fn substation_at(&self, node: usize) -> Option<usize> {
        self.node_substation[node]
    }

    pub fn limits(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.limit_mw).collect()
    }

    pub fn in_service_mask(&self) -> Vec<bool> {
        self.branches.iter().map(|b| b.in_service).collect()
    }

    pub fn graph(&self) -> Graph {
        Graph::new(self.nodes.len(), self.branches.iter().map(|b| (b.from, b.to)).collect())
    }
}

/// Net nodal injection in MW, with the slack entry set to balance the sum.
pub fn base_power_vector(grid: &GridModel) -> Vec<f64> {
    let mut p = vec![0.0; grid.node_count()];
    for inj in &grid.injections {
        p[inj.node] += inj.p_mw;
    }
    balance_at_slack(&mut p, grid.slack);
    p
}

pub(crate) fn balance_at_slack(p: &mut [f64], slack: usize) {
    p[slack] = 0.0;
    let residual: f64 = p.iter().sum();
    p[slack] = -residual;
}

#[allow(clippy::too_many_arguments)]
fn build_substation(
    s: &SubstationData,
    node_index: &HashMap<String, usize>,
    branch_index: &HashMap<String, usize>,
    injection_index: &HashMap<String, usize>,
    branches: &[Branch],
    node_branches: &[Vec<usize>],
    node_injections: &[Vec<usize>],
) -> Result<Substation> {
    let ctx = || format!("substation `{}`", s.node);
    let node = index_of(node_index, &s.node, "node", ctx)?;
    if s.busbars.is_empty() {
        return Err(Error::Validation(format!("{}: no busbars", ctx())));
    }
    if s.busbars.len() > 16 {
        return Err(Error::Validation(format!("{}: more than 16 busbars", ctx())));
    }
    let busbar_index = unique_index(s.busbars.iter().map(String::as_str), "busbar")
        .map_err(|e| Error::Validation(format!("{}: {e}", ctx())))?;
    let busbar = |id: &str| index_of(&busbar_index, id, "busbar", ctx);

    let mut couplers = Vec::with_capacity(s.couplers.len());
    for [a, b] in &s.couplers {
        let (a, b) = (busbar(a)?, busbar(b)?);
        if a == b {
            return Err(Error::Validation(format!("{}: coupler connects a busbar to itself", ctx())));
        }
        couplers.push((a, b));
    }
    let coupler_graph = Graph::new(s.busbars.len(), couplers.clone());
    if !coupler_graph.is_connected(&vec![true; couplers.len()]) {
        return Err(Error::Validation(format!(
            "{}: busbars are not coupled in the default state",
            ctx()
        )));
    }

    let mut seen = HashSet::new();
    let mut terminals = Vec::with_capacity(s.terminals.len());
    for t in &s.terminals {
        let element = if let Some(&b) = branch_index.get(&t.element) {
            if branches[b].from != node && branches[b].to != node {
                return Err(Error::Validation(format!(
                    "{}: branch `{}` does not end at this node",
                    ctx(),
                    t.element
                )));
            }
            Element::Branch(b)
        } else if let Some(&i) = injection_index.get(&t.element) {
            if !node_injections[node].contains(&i) {
                return Err(Error::Validation(format!(
                    "{}: injection `{}` is not at this node",
                    ctx(),
                    t.element
                )));
            }
            Element::Injection(i)
        } else {
            return Err(Error::Validation(format!("{}: unknown element `{}`", ctx(), t.element)));
        };
        if !seen.insert(element) {
            return Err(Error::Validation(format!("{}: element `{}` listed twice", ctx(), t.element)));
        }
        let mut reachable = t.reachable.iter().map(|b| busbar(b)).collect::<Result<Vec<_>>>()?;
        reachable.sort_unstable();
        reachable.dedup();
        let default_busbar = busbar(&t.default)?;
        if !reachable.contains(&default_busbar) {
            return Err(Error::Validation(format!(
                "{}: terminal `{}` default busbar is not reachable",
                ctx(),
                t.element
            )));
        }
        terminals.push(Terminal {
            element,
            reachable,
            default_busbar,
        });
    }
    let expected = node_branches[node].len() + node_injections[node].len();
    if terminals.len() != expected {
        return Err(Error::Validation(format!(
            "{}: {} terminals listed but {} elements connect to the node",
            ctx(),
            terminals.len(),
            expected
        )));
    }
    if terminals.len() > 64 {
        return Err(Error::Validation(format!("{}: more than 64 terminals", ctx())));
    }
    Ok(Substation {
        node,
        busbars: s.busbars.clone(),
        couplers,
        terminals,
    })
}
