//! Base-case DC sensitivities.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::grid::GridModel;
use crate::{Error, Result};

/// Dense PTDF for the base topology, together with the slack-grounded
/// inverse susceptance matrix it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtdfMatrix {
    pub branch_count: usize,
    pub node_count: usize,
    pub slack: usize,
    /// Row-major `branch_count x node_count`; the slack column is zero.
    pub data: Vec<f64>,
    /// Row-major `node_count x node_count` inverse with zero slack row and column.
    pub inverse: Vec<f64>,
    /// Branch mask the matrix was built for.
    pub in_service: Vec<bool>,
}

impl PtdfMatrix {
    pub fn get(&self, branch: usize, node: usize) -> f64 {
        self.data[branch * self.node_count + node]
    }

    pub fn row(&self, branch: usize) -> &[f64] {
        &self.data[branch * self.node_count..(branch + 1) * self.node_count]
    }

    pub fn inverse_entry(&self, i: usize, j: usize) -> f64 {
        self.inverse[i * self.node_count + j]
    }

    /// Branch flows for an injection vector (MW in, MW out).
    pub fn flows(&self, p: &[f64]) -> Vec<f64> {
        (0..self.branch_count)
            .map(|e| self.row(e).iter().zip(p).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Inverts the slack-grounded susceptance matrix of `edges` (with per-edge
/// susceptance `y` and mask `active`) over `n` nodes. Extra grounded nodes
/// carry a conductance to reference given in `ground`. Returns the full
/// `n x n` inverse with zero rows and columns at `slack`.
pub(crate) fn grounded_inverse(
    n: usize,
    edges: &[(usize, usize)],
    y: &[f64],
    active: &[bool],
    slack: usize,
    ground: &[(usize, f64)],
) -> Result<Vec<f64>> {
    let reduced = |v: usize| if v < slack { Some(v) } else if v == slack { None } else { Some(v - 1) };
    let m = n - 1;
    let mut b = DMatrix::<f64>::zeros(m, m);
    for (k, &(i, j)) in edges.iter().enumerate() {
        if !active[k] {
            continue;
        }
        let (ri, rj) = (reduced(i), reduced(j));
        if let Some(a) = ri {
            b[(a, a)] += y[k];
        }
        if let Some(c) = rj {
            b[(c, c)] += y[k];
        }
        if let (Some(a), Some(c)) = (ri, rj) {
            b[(a, c)] -= y[k];
            b[(c, a)] -= y[k];
        }
    }
    for &(v, g) in ground {
        if let Some(a) = reduced(v) {
            b[(a, a)] += g;
        }
    }
    let inv = b.cholesky().ok_or(Error::SingularSystem)?.inverse();
    let mut full = vec![0.0; n * n];
    for i in 0..n {
        let Some(ri) = reduced(i) else { continue };
        for j in 0..n {
            if let Some(rj) = reduced(j) {
                full[i * n + j] = inv[(ri, rj)];
            }
        }
    }
    Ok(full)
}

/// Builds the PTDF of the base topology. Fails with
/// [`Error::SingularSystem`] when the in-service graph is disconnected.
pub fn build_ptdf(grid: &GridModel) -> Result<PtdfMatrix> {
    let n = grid.node_count();
    let edges: Vec<(usize, usize)> = grid.branches.iter().map(|b| (b.from, b.to)).collect();
    let y: Vec<f64> = grid.branches.iter().map(|b| b.susceptance()).collect();
    let in_service = grid.in_service_mask();
    if !grid.graph().is_connected(&in_service) {
        return Err(Error::SingularSystem);
    }
    let inverse = grounded_inverse(n, &edges, &y, &in_service, grid.slack, &[])?;
    let mut data = vec![0.0; edges.len() * n];
    for (e, &(i, j)) in edges.iter().enumerate() {
        if !in_service[e] {
            continue;
        }
        for k in 0..n {
            data[e * n + k] = y[e] * (inverse[i * n + k] - inverse[j * n + k]);
        }
    }
    Ok(PtdfMatrix {
        branch_count: edges.len(),
        node_count: n,
        slack: grid.slack,
        data,
        inverse,
        in_service,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tests::two_bus_json;

    #[test]
    fn two_bus_single_path() {
        let g = GridModel::from_json_str(&two_bus_json(0.1)).unwrap();
        let ptdf = build_ptdf(&g).unwrap();
        assert!((ptdf.get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(ptdf.get(0, 1), 0.0);
        let f = ptdf.flows(&[100.0, -100.0]);
        assert!((f[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_triangle_splits_one_third_two_thirds() {
        let text = r#"{"nodes": [{"id": "A"}, {"id": "B"}, {"id": "C"}],
            "branches": [
                {"id": "AB", "from": "A", "to": "B", "x_pu": 0.1, "limit_mw": 100},
                {"id": "BC", "from": "B", "to": "C", "x_pu": 0.1, "limit_mw": 100},
                {"id": "AC", "from": "A", "to": "C", "x_pu": 0.1, "limit_mw": 100}],
            "slack": "C"}"#;
        let g = GridModel::from_json_str(text).unwrap();
        let f = build_ptdf(&g).unwrap().flows(&[90.0, 0.0, -90.0]);
        assert!((f[0] - 30.0).abs() < 1e-9, "{f:?}");
        assert!((f[1] - 30.0).abs() < 1e-9);
        assert!((f[2] - 60.0).abs() < 1e-9);
    }
}
