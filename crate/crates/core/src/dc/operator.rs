//! Flow operators for modified topologies.
//!
//! The base inverse `X` is extended with one dummy-grounded node per split,
//! `X_aug = diag(X, I/g0)`. A topology change is a sum of rank-one
//! susceptance terms `c_k u_k u_k^T`; Woodbury then gives
//! `X' = X_aug - W K^-1 W^T` with `W = X_aug U` and `K = C^-1 + U^T W`.

use nalgebra::{DMatrix, DVector};

use crate::graph::UnionFind;
use crate::grid::GridModel;
use crate::ptdf::{grounded_inverse, PtdfMatrix};
use crate::topology::Topology;
use crate::{Error, Result};

/// Conductance to reference used for dummy and dead-component grounds.
pub const GROUND: f64 = 1.0;

/// Injection magnitude below which a node counts as empty.
pub const DEAD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMethod {
    /// Woodbury update of the base inverse.
    #[default]
    LowRank,
    /// Refactorize the modified susceptance matrix from scratch.
    Rebuild,
}

/// Sparse column of an update matrix `U`.
pub(crate) type Column = Vec<(usize, f64)>;

pub(crate) fn incidence(i: usize, j: usize) -> Column {
    vec![(i, 1.0), (j, -1.0)]
}

/// Factors of a low-rank correction against a dense symmetric `x`.
pub(crate) struct Correction {
    /// `x U`, row-major `n x r`.
    pub w: Vec<f64>,
    pub k_inv: DMatrix<f64>,
    pub rank: usize,
}

impl Correction {
    pub fn new(x: &[f64], n: usize, cols: &[Column], c: &[f64]) -> Result<Self> {
        let r = cols.len();
        let mut w = vec![0.0; n * r];
        for (k, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                for row in 0..n {
                    w[row * r + k] += v * x[i * n + row];
                }
            }
        }
        let mut k = DMatrix::<f64>::zeros(r, r);
        for (a, col) in cols.iter().enumerate() {
            for b in 0..r {
                k[(a, b)] = col.iter().map(|&(i, v)| v * w[i * r + b]).sum();
            }
            k[(a, a)] += 1.0 / c[a];
        }
        let k_inv = k.try_inverse().ok_or(Error::SingularSystem)?;
        Ok(Correction { w, k_inv, rank: r })
    }

    /// `v - W K^-1 U^T v` where `U^T v` is supplied by `cols`.
    pub fn apply(&self, cols: &[Column], v: &mut [f64]) {
        let r = self.rank;
        let ut_v = DVector::from_iterator(r, cols.iter().map(|col| col.iter().map(|&(i, c)| c * v[i]).sum()));
        let coeff = &self.k_inv * ut_v;
        for (row, value) in v.iter_mut().enumerate() {
            let w_row = &self.w[row * r..(row + 1) * r];
            *value -= w_row.iter().zip(coeff.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Dense `x - W K^-1 W^T`.
    pub fn updated(&self, x: &[f64], n: usize) -> Vec<f64> {
        let r = self.rank;
        let w = DMatrix::from_row_slice(n, r, &self.w);
        let m = &self.k_inv * w.transpose();
        let mut out = x.to_vec();
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..r {
                    s += self.w[i * r + k] * m[(k, j)];
                }
                out[i * n + j] -= s;
            }
        }
        out
    }
}

/// Maps injection vectors to branch flows on one modified topology.
#[derive(Debug, Clone)]
pub struct FlowOperator {
    pub n: usize,
    /// Row-major `n x n` slack-grounded inverse of the modified system.
    pub x: Vec<f64>,
    pub ends: Vec<(usize, usize)>,
    pub y: Vec<f64>,
    pub active: Vec<bool>,
    pub slack: usize,
    /// Nodes carrying a ground besides the slack (dead components).
    pub grounded: Vec<bool>,
}

/// Dead components of the topology and where each is grounded. Errors with
/// the offending node when a component off the slack carries injection.
struct DeadSets {
    grounded: Vec<bool>,
}

fn classify(topo: &Topology, p: &[f64]) -> std::result::Result<DeadSets, usize> {
    let n = topo.node_count;
    let mut uf = UnionFind::new(n);
    for (k, &(i, j)) in topo.ends.iter().enumerate() {
        if topo.active[k] {
            uf.union(i, j);
        }
    }
    let slack_root = uf.find(topo.slack);
    let mut rep: Vec<Option<usize>> = vec![None; n];
    for v in 0..n {
        let root = uf.find(v);
        if root == slack_root {
            continue;
        }
        if p[v].abs() > DEAD_TOLERANCE {
            return Err(v);
        }
        // prefer a split node so its dummy ground can stay in place
        let better = match rep[root] {
            None => true,
            Some(r) => r < topo.base_node_count && v >= topo.base_node_count,
        };
        if better {
            rep[root] = Some(v);
        }
    }
    let mut grounded = vec![false; n];
    for r in rep.into_iter().flatten() {
        grounded[r] = true;
    }
    Ok(DeadSets { grounded })
}

impl FlowOperator {
    /// Builds the operator for `topo`. Returns `Ok(None)` when the topology
    /// strands injection away from the slack.
    pub fn new(
        grid: &GridModel,
        ptdf: &PtdfMatrix,
        topo: &Topology,
        method: FlowMethod,
    ) -> Result<Option<Self>> {
        let p = topo.injections(grid, &[]);
        let Ok(dead) = classify(topo, &p) else {
            return Ok(None);
        };
        let y: Vec<f64> = grid.branches.iter().map(|b| b.susceptance()).collect();
        let x = match method {
            FlowMethod::LowRank => low_rank_inverse(grid, ptdf, topo, &y, &dead.grounded)?,
            FlowMethod::Rebuild => {
                let ground: Vec<(usize, f64)> = (0..topo.node_count)
                    .filter(|&v| dead.grounded[v])
                    .map(|v| (v, GROUND))
                    .collect();
                grounded_inverse(topo.node_count, &topo.ends, &y, &topo.active, topo.slack, &ground)?
            }
        };
        Ok(Some(FlowOperator {
            n: topo.node_count,
            x,
            ends: topo.ends.clone(),
            y,
            active: topo.active.clone(),
            slack: topo.slack,
            grounded: dead.grounded,
        }))
    }

    pub fn angles(&self, p: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| self.x[i * n..(i + 1) * n].iter().zip(p).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn flows_from_angles(&self, theta: &[f64], removed: &[usize]) -> Vec<f64> {
        self.ends
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| {
                if self.active[k] && !removed.contains(&k) {
                    self.y[k] * (theta[i] - theta[j])
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Branch flows in MW; inactive branches carry 0.
    pub fn flows(&self, p: &[f64]) -> Vec<f64> {
        self.flows_from_angles(&self.angles(p), &[])
    }
}

fn low_rank_inverse(
    grid: &GridModel,
    ptdf: &PtdfMatrix,
    topo: &Topology,
    y: &[f64],
    grounded: &[bool],
) -> Result<Vec<f64>> {
    let n0 = ptdf.node_count;
    let n = topo.node_count;
    let mut x_aug = vec![0.0; n * n];
    for i in 0..n0 {
        x_aug[i * n..i * n + n0].copy_from_slice(&ptdf.inverse[i * n0..(i + 1) * n0]);
    }
    for s in n0..n {
        x_aug[s * n + s] = 1.0 / GROUND;
    }

    let mut cols: Vec<Column> = Vec::new();
    let mut c: Vec<f64> = Vec::new();
    for (k, b) in grid.branches.iter().enumerate() {
        if !ptdf.in_service[k] {
            continue;
        }
        let now = topo.ends[k];
        if topo.active[k] && now == (b.from, b.to) {
            continue;
        }
        cols.push(incidence(b.from, b.to));
        c.push(-y[k]);
        if topo.active[k] {
            cols.push(incidence(now.0, now.1));
            c.push(y[k]);
        }
    }
    for (s, _) in grounded.iter().enumerate().skip(n0).filter(|(_, g)| !**g) {
        cols.push(vec![(s, 1.0)]);
        c.push(-GROUND);
    }
    for (v, _) in grounded.iter().enumerate().take(n0).filter(|(_, g)| **g) {
        cols.push(vec![(v, 1.0)]);
        c.push(GROUND);
    }
    if cols.is_empty() {
        return Ok(x_aug);
    }
    // rows and columns of the slack are zero in X_aug; drop slack entries so
    // the update stays within the grounded subspace
    for col in &mut cols {
        col.retain(|&(i, _)| i != topo.slack);
    }
    Ok(Correction::new(&x_aug, n, &cols, &c)?.updated(&x_aug, n))
}
