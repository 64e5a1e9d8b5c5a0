//! Newton-Raphson AC power flow in polar coordinates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::graph::UnionFind;
use crate::grid::{GridModel, InjectionKind, BASE_MVA};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Convergence threshold on the largest power mismatch, per unit.
    pub tolerance: f64,
    /// Newton steps allowed.
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-6,
            max_iterations: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcCaseResult {
    pub converged: bool,
    /// Mismatch evaluations performed.
    pub iterations: usize,
    /// Per-branch apparent power (MVA, larger of the two ends); present iff
    /// converged. Out-of-service branches carry 0.
    pub loading_mva: Option<Vec<f64>>,
    /// Voltage magnitude (pu) and angle (rad) per node; dropped nodes are
    /// reported as `(0, 0)`.
    pub voltages: Vec<(f64, f64)>,
    /// Largest residual mismatch at exit, per unit.
    pub max_mismatch: f64,
}

impl AcCaseResult {
    fn failed(n: usize, iterations: usize, max_mismatch: f64) -> Self {
        AcCaseResult {
            converged: false,
            iterations,
            loading_mva: None,
            voltages: vec![(0.0, 0.0); n],
            max_mismatch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BusKind {
    Slack,
    Pv,
    Pq,
}

/// Network prepared for one case: admittance matrix over live nodes.
struct Network {
    /// Live node -> topology node.
    nodes: Vec<usize>,
    g: DMatrix<f64>,
    b: DMatrix<f64>,
    kind: Vec<BusKind>,
    p_sched: Vec<f64>,
    q_sched: Vec<f64>,
    v_start: Vec<f64>,
}

struct BranchAdmittance {
    yff: (f64, f64),
    yft: (f64, f64),
    ytf: (f64, f64),
    ytt: (f64, f64),
}

fn branch_admittance(r: f64, x: f64, charging: f64, tap: f64) -> BranchAdmittance {
    let d = r * r + x * x;
    let ys = (r / d, -x / d);
    let ytt = (ys.0, ys.1 + charging / 2.0);
    BranchAdmittance {
        yff: (ytt.0 / (tap * tap), ytt.1 / (tap * tap)),
        yft: (-ys.0 / tap, -ys.1 / tap),
        ytf: (-ys.0 / tap, -ys.1 / tap),
        ytt,
    }
}

/// Which branches and injections take part in a case.
struct CaseMask<'a> {
    removed_branches: &'a [usize],
    removed_injections: &'a [usize],
}

impl CaseMask<'_> {
    fn branch_on(&self, topo: &Topology, k: usize) -> bool {
        topo.active[k] && !self.removed_branches.contains(&k)
    }

    fn injection_on(&self, k: usize) -> bool {
        !self.removed_injections.contains(&k)
    }
}

/// `Err(())` when a component without the slack carries injection.
fn build_network(grid: &GridModel, topo: &Topology, mask: &CaseMask<'_>) -> Result<Network, ()> {
    let n = topo.node_count;
    let mut uf = UnionFind::new(n);
    for k in 0..grid.branch_count() {
        if mask.branch_on(topo, k) {
            uf.union(topo.ends[k].0, topo.ends[k].1);
        }
    }
    let slack_root = uf.find(topo.slack);
    for (k, inj) in grid.injections.iter().enumerate() {
        let node = topo.injection_node[k];
        let live = inj.p_mw != 0.0 || inj.q_mvar != 0.0;
        if mask.injection_on(k) && live && uf.find(node) != slack_root {
            return Err(());
        }
    }
    let nodes: Vec<usize> = (0..n).filter(|&v| uf.find(v) == slack_root).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i;
    }
    let m = nodes.len();
    let mut g = DMatrix::zeros(m, m);
    let mut b = DMatrix::zeros(m, m);
    for (k, br) in grid.branches.iter().enumerate() {
        if !mask.branch_on(topo, k) {
            continue;
        }
        let (f, t) = (local[topo.ends[k].0], local[topo.ends[k].1]);
        if f == usize::MAX {
            // both ends sit in a dead island
            continue;
        }
        let y = branch_admittance(br.resistance, br.reactance, br.charging, br.tap);
        g[(f, f)] += y.yff.0;
        b[(f, f)] += y.yff.1;
        g[(f, t)] += y.yft.0;
        b[(f, t)] += y.yft.1;
        g[(t, f)] += y.ytf.0;
        b[(t, f)] += y.ytf.1;
        g[(t, t)] += y.ytt.0;
        b[(t, t)] += y.ytt.1;
    }
    for (i, &v) in nodes.iter().enumerate() {
        if v < topo.base_node_count {
            b[(i, i)] += grid.nodes[v].shunt_mvar / BASE_MVA;
        }
    }

    let mut kind = vec![BusKind::Pq; m];
    let mut v_start = vec![1.0; m];
    let mut p_sched = vec![0.0; m];
    let mut q_sched = vec![0.0; m];
    for (k, inj) in grid.injections.iter().enumerate() {
        let i = local[topo.injection_node[k]];
        if !mask.injection_on(k) || i == usize::MAX {
            continue;
        }
        p_sched[i] += inj.p_mw / BASE_MVA;
        q_sched[i] += inj.q_mvar / BASE_MVA;
        if let (InjectionKind::Generator, Some(v)) = (inj.kind, inj.v_setpoint) {
            if kind[i] == BusKind::Pq {
                kind[i] = BusKind::Pv;
                v_start[i] = v;
            }
        }
    }
    kind[local[topo.slack]] = BusKind::Slack;
    Ok(Network {
        nodes,
        g,
        b,
        kind,
        p_sched,
        q_sched,
        v_start,
    })
}

/// Injected power at every bus for the given state.
fn power(net: &Network, v: &[f64], th: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = v.len();
    let mut p = vec![0.0; m];
    let mut q = vec![0.0; m];
    for i in 0..m {
        for k in 0..m {
            let (gik, bik) = (net.g[(i, k)], net.b[(i, k)]);
            if gik == 0.0 && bik == 0.0 {
                continue;
            }
            let (s, c) = (th[i] - th[k]).sin_cos();
            p[i] += v[i] * v[k] * (gik * c + bik * s);
            q[i] += v[i] * v[k] * (gik * s - bik * c);
        }
    }
    (p, q)
}

/// Solves one case: `removed_*` are taken out on top of the topology.
pub fn solve_case(
    grid: &GridModel,
    topo: &Topology,
    removed_branches: &[usize],
    removed_injections: &[usize],
    options: &SolverOptions,
) -> AcCaseResult {
    let mask = CaseMask {
        removed_branches,
        removed_injections,
    };
    let n = topo.node_count;
    let Ok(net) = build_network(grid, topo, &mask) else {
        return AcCaseResult::failed(n, 0, f64::INFINITY);
    };
    let m = net.nodes.len();
    let mut v = net.v_start.clone();
    let mut th = vec![0.0; m];

    // unknown ordering: angles of non-slack buses, then magnitudes of PQ buses
    let ang: Vec<usize> = (0..m).filter(|&i| net.kind[i] != BusKind::Slack).collect();
    let mag: Vec<usize> = (0..m).filter(|&i| net.kind[i] == BusKind::Pq).collect();
    let (na, nm) = (ang.len(), mag.len());

    let mut iterations = 0;
    let mut steps = 0;
    loop {
        let (p, q) = power(&net, &v, &th);
        iterations += 1;
        let mut f = DVector::zeros(na + nm);
        for (r, &i) in ang.iter().enumerate() {
            f[r] = net.p_sched[i] - p[i];
        }
        for (r, &i) in mag.iter().enumerate() {
            f[na + r] = net.q_sched[i] - q[i];
        }
        let worst = f.amax();
        if !worst.is_finite() {
            return AcCaseResult::failed(n, iterations, worst);
        }
        if worst < options.tolerance {
            break;
        }
        if steps == options.max_iterations {
            return AcCaseResult::failed(n, iterations, worst);
        }

        let mut jac = DMatrix::zeros(na + nm, na + nm);
        let mut col_a = vec![usize::MAX; m];
        let mut col_m = vec![usize::MAX; m];
        for (c, &k) in ang.iter().enumerate() {
            col_a[k] = c;
        }
        for (c, &k) in mag.iter().enumerate() {
            col_m[k] = na + c;
        }
        let rows = ang.iter().map(|&i| (i, false)).chain(mag.iter().map(|&i| (i, true)));
        for (r, (i, reactive)) in rows.enumerate() {
            for k in 0..m {
                let (gik, bik) = (net.g[(i, k)], net.b[(i, k)]);
                if k != i && gik == 0.0 && bik == 0.0 {
                    continue;
                }
                let (s, c) = (th[i] - th[k]).sin_cos();
                // derivatives of P_i (or Q_i) w.r.t. theta_k and V_k
                let (d_th, d_v) = if k == i {
                    if reactive {
                        (p[i] - gik * v[i] * v[i], q[i] / v[i] - bik * v[i])
                    } else {
                        (-q[i] - bik * v[i] * v[i], p[i] / v[i] + gik * v[i])
                    }
                } else if reactive {
                    (-v[i] * v[k] * (gik * c + bik * s), v[i] * (gik * s - bik * c))
                } else {
                    (v[i] * v[k] * (gik * s - bik * c), v[i] * (gik * c + bik * s))
                };
                if col_a[k] != usize::MAX {
                    jac[(r, col_a[k])] = d_th;
                }
                if col_m[k] != usize::MAX {
                    jac[(r, col_m[k])] = d_v;
                }
            }
        }
        let Some(dx) = jac.lu().solve(&f) else {
            return AcCaseResult::failed(n, iterations, worst);
        };
        for (c, &i) in ang.iter().enumerate() {
            th[i] += dx[c];
        }
        for (c, &i) in mag.iter().enumerate() {
            v[i] += dx[na + c];
        }
        steps += 1;
        if v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return AcCaseResult::failed(n, iterations, worst);
        }
    }

    let (p, q) = power(&net, &v, &th);
    let max_mismatch = (0..m)
        .map(|i| {
            let dp = if net.kind[i] == BusKind::Slack { 0.0 } else { net.p_sched[i] - p[i] };
            let dq = if net.kind[i] == BusKind::Pq { net.q_sched[i] - q[i] } else { 0.0 };
            dp.abs().max(dq.abs())
        })
        .fold(0.0, f64::max);

    let mut voltages = vec![(0.0, 0.0); n];
    let mut local = vec![usize::MAX; n];
    for (i, &node) in net.nodes.iter().enumerate() {
        voltages[node] = (v[i], th[i]);
        local[node] = i;
    }
    let loading = grid
        .branches
        .iter()
        .enumerate()
        .map(|(k, br)| {
            if !mask.branch_on(topo, k) {
                return 0.0;
            }
            let (f, t) = (local[topo.ends[k].0], local[topo.ends[k].1]);
            if f == usize::MAX {
                return 0.0;
            }
            let y = branch_admittance(br.resistance, br.reactance, br.charging, br.tap);
            let vf = (v[f] * th[f].cos(), v[f] * th[f].sin());
            let vt = (v[t] * th[t].cos(), v[t] * th[t].sin());
            let end_power = |yaa: (f64, f64), yab: (f64, f64), va: (f64, f64), vb: (f64, f64)| {
                let i_re = yaa.0 * va.0 - yaa.1 * va.1 + yab.0 * vb.0 - yab.1 * vb.1;
                let i_im = yaa.0 * va.1 + yaa.1 * va.0 + yab.0 * vb.1 + yab.1 * vb.0;
                // S = V * conj(I)
                let s_re = va.0 * i_re + va.1 * i_im;
                let s_im = va.1 * i_re - va.0 * i_im;
                s_re.hypot(s_im)
            };
            let sf = end_power(y.yff, y.yft, vf, vt);
            let st = end_power(y.ytt, y.ytf, vt, vf);
            sf.max(st) * BASE_MVA
        })
        .collect();
    AcCaseResult {
        converged: true,
        iterations,
        loading_mva: Some(loading),
        voltages,
        max_mismatch,
    }
}

/// Solves the unmodified grid.
pub fn ac_power_flow(grid: &GridModel, options: &SolverOptions) -> AcCaseResult {
    solve_case(grid, &Topology::base(grid), &[], &[], options)
}

/// Complex power injected at each live node of a converged case, per unit,
/// recomputed from the voltages (used for balance checks).
pub fn nodal_power(grid: &GridModel, topo: &Topology, result: &AcCaseResult) -> Vec<(f64, f64)> {
    let mask = CaseMask {
        removed_branches: &[],
        removed_injections: &[],
    };
    let Ok(net) = build_network(grid, topo, &mask) else {
        return Vec::new();
    };
    let v: Vec<f64> = net.nodes.iter().map(|&n| result.voltages[n].0).collect();
    let th: Vec<f64> = net.nodes.iter().map(|&n| result.voltages[n].1).collect();
    let (p, q) = power(&net, &v, &th);
    let mut out = vec![(0.0, 0.0); topo.node_count];
    for (i, &node) in net.nodes.iter().enumerate() {
        out[node] = (p[i], q[i]);
    }
    out
}
