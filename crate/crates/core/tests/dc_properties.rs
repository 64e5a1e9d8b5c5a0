mod support;

use proptest::prelude::*;
use tto_core::dc::{apply_topology, compute_scores, screen_contingencies, DcConfig, DcEvaluator, FlowMethod};
use tto_core::grid::base_power_vector;
use tto_core::importer::{ImportArtifacts, ImportConfig};
use tto_core::qd::{mutate, MutationConfig};
use tto_core::rng::stream;
use tto_core::{Genome, GridModel};

use support::{dc_flows, network, random_grid, RandomGridShape};

fn grid_for(seed: u64, nodes: usize) -> (GridModel, ImportArtifacts) {
    let mut rng = stream(seed, &[]);
    let grid = random_grid(
        &mut rng,
        &RandomGridShape {
            nodes,
            extra_edges: nodes / 2 + 1,
            max_contingencies: 8,
            substations: 4,
        },
    );
    let art = ImportArtifacts::build(&grid, &ImportConfig::default()).unwrap();
    (grid, art)
}

fn walk(art: &ImportArtifacts, seed: u64, steps: usize) -> Genome {
    let mut rng = stream(seed, &[7]);
    let mut g = Genome::empty(3, 2);
    for _ in 0..steps {
        g = mutate(&g, &art.actions, &MutationConfig::default(), &mut rng);
    }
    g
}

#[test]
fn ptdf_flows_match_angle_solution() {
    for name in ["ieee14.json", "ieee14_congested.json"] {
        let grid = support::fixture(name);
        let art = ImportArtifacts::build(&grid, &ImportConfig::default()).unwrap();
        let p = base_power_vector(&grid);
        let got = art.ptdf.flows(&p);
        let net = network(&grid, &art.actions, &Genome::empty(0, 0));
        let want = dc_flows(&grid, &net, &[], &[]).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn superposition(seed in any::<u64>(), nodes in 8usize..30, steps in 0usize..6, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (grid, art) = grid_for(seed, nodes);
        let genome = walk(&art, seed, steps);
        if let Some((topo, op)) = apply_topology(&grid, &art.ptdf, &art.actions, &genome, FlowMethod::LowRank).unwrap() {
            let n = topo.node_count;
            let mut rng = stream(seed, &[9]);
            let mut p1: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -50.0..50.0)).collect();
            let mut p2: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -50.0..50.0)).collect();
            // keep injections away from dead nodes so both vectors stay admissible
            let base = topo.injections(&grid, &[]);
            for v in 0..n {
                if base[v] == 0.0 && v != topo.slack {
                    p1[v] = 0.0;
                    p2[v] = 0.0;
                }
            }
            for p in [&mut p1, &mut p2] {
                let s: f64 = p.iter().enumerate().filter(|&(v, _)| v != topo.slack).map(|(_, x)| x).sum();
                p[topo.slack] = -s;
            }
            let mix: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| a * x + b * y).collect();
            let (f1, f2, fm) = (op.flows(&p1), op.flows(&p2), op.flows(&mix));
            for k in 0..fm.len() {
                let lin = a * f1[k] + b * f2[k];
                prop_assert!((fm[k] - lin).abs() <= 1e-8 * (1.0 + lin.abs()));
            }
        }
    }

    #[test]
    fn nodal_balance(seed in any::<u64>(), nodes in 8usize..30, steps in 0usize..8) {
        let (grid, art) = grid_for(seed, nodes);
        let genome = walk(&art, seed, steps);
        if let Some((topo, op)) = apply_topology(&grid, &art.ptdf, &art.actions, &genome, FlowMethod::LowRank).unwrap() {
            let p = topo.injections(&grid, &[]);
            let f = op.flows(&p);
            let mut net = vec![0.0; topo.node_count];
            for (k, &(i, j)) in topo.ends.iter().enumerate() {
                net[i] += f[k];
                net[j] -= f[k];
            }
            for v in 0..topo.node_count {
                prop_assert!((net[v] - p[v]).abs() < 1e-7, "node {} out {} inj {}", v, net[v], p[v]);
            }
        }
    }

    #[test]
    fn contingency_flows_match_rebuild_on_modified_topologies(seed in any::<u64>(), nodes in 8usize..30, steps in 1usize..8) {
        let (grid, art) = grid_for(seed, nodes);
        let genome = walk(&art, seed, steps);
        let oracle_net = network(&grid, &art.actions, &genome);
        if let Some((topo, op)) = apply_topology(&grid, &art.ptdf, &art.actions, &genome, FlowMethod::LowRank).unwrap() {
            let res = screen_contingencies(&grid, &art.actions, &topo, &op, 1e4);
            let mut want = vec![0.0f64; grid.branch_count()];
            for (c, case) in grid.contingencies.iter().enumerate() {
                match dc_flows(&grid, &oracle_net, &case.branches, &case.injections) {
                    Some(f) => {
                        prop_assert!(!res.case_islanded[c]);
                        for (m, v) in want.iter_mut().zip(&f) {
                            *m = m.max(v.abs());
                        }
                    }
                    None => prop_assert!(res.case_islanded[c]),
                }
            }
            for (a, b) in res.f_max.iter().zip(&want) {
                prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn tighter_limits_never_reduce_overload(seed in any::<u64>(), nodes in 8usize..25, steps in 0usize..6, scale in 0.1f64..1.0) {
        let (grid, art) = grid_for(seed, nodes);
        let genome = walk(&art, seed, steps);
        let ev = DcEvaluator::new(&grid, &art.actions, &art.ptdf, DcConfig::default(), 3, 2).unwrap();
        if let Some(flows) = ev.flows(&genome) {
            let cfg = DcConfig::default();
            let limits = grid.limits();
            let tight: Vec<f64> = limits.iter().map(|l| l * scale).collect();
            let loose = compute_scores(&flows, &limits, &genome, &art.actions, &cfg, 0.0);
            let strict = compute_scores(&flows, &tight, &genome, &art.actions, &cfg, 0.0);
            prop_assert!(strict.lambda_o >= loose.lambda_o);
            prop_assert!(strict.lambda_c >= loose.lambda_c);
            prop_assert!(strict.lambda_c0 >= loose.lambda_c0);
            prop_assert!(strict.fitness <= loose.fitness);
        }
    }

    #[test]
    fn scoring_is_pure_and_order_free(seed in any::<u64>(), nodes in 8usize..25) {
        let (grid, art) = grid_for(seed, nodes);
        let ev = DcEvaluator::new(&grid, &art.actions, &art.ptdf, DcConfig::default(), 3, 2).unwrap();
        let genomes: Vec<Genome> = (0..12).map(|s| walk(&art, seed ^ s, (s % 5) as usize)).collect();
        let batch = ev.evaluate_batch(&genomes);
        let seq = ev.evaluate_batch_sequential(&genomes);
        prop_assert_eq!(&batch, &seq);
        let mut reversed = genomes.clone();
        reversed.reverse();
        let mut back = ev.evaluate_batch(&reversed);
        back.reverse();
        prop_assert_eq!(&batch, &back);
        let padded = ev.evaluate_padded(&genomes, 5);
        prop_assert_eq!(&batch, &padded);
    }
}
