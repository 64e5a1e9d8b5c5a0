mod support;

use tto_core::dc::{DcConfig, DcEvaluator};
use tto_core::importer::{ImportArtifacts, ImportConfig};
use tto_core::qd::{self, QdConfig, Snapshot};
use tto_core::GridModel;

fn setup() -> (GridModel, ImportArtifacts) {
    let grid = support::fixture("ieee14_congested.json");
    let art = ImportArtifacts::build(&grid, &ImportConfig::default()).unwrap();
    (grid, art)
}

fn config(seed: u64) -> QdConfig {
    QdConfig {
        batch_size: 32,
        iters_per_epoch: 10,
        max_evaluations: Some(1 + 32 * 35),
        seed,
        ..QdConfig::default()
    }
}

#[test]
fn same_seed_same_search() {
    let (grid, art) = setup();
    let ev = DcEvaluator::new(&grid, &art.actions, &art.ptdf, DcConfig::default(), 3, 2).unwrap();
    let mut snaps_a: Vec<Snapshot> = Vec::new();
    let mut snaps_b: Vec<Snapshot> = Vec::new();
    let a = qd::run(&ev, &config(3), None, |s| snaps_a.push(s)).unwrap();
    let b = qd::run(&ev, &config(3), None, |s| snaps_b.push(s)).unwrap();
    assert_eq!(snaps_a, snaps_b);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.evaluations, 1 + 32 * 35);
    assert_eq!(a.iterations, 35);

    let c = qd::run(&ev, &config(4), None, |_| {}).unwrap();
    let keys = |o: &qd::RunOutcome| o.repertoire.elites().map(|e| e.genome.key()).collect::<Vec<_>>();
    assert_ne!(keys(&a), keys(&c));
}

#[test]
fn snapshots_per_epoch_and_one_final() {
    let (grid, art) = setup();
    let ev = DcEvaluator::new(&grid, &art.actions, &art.ptdf, DcConfig::default(), 3, 2).unwrap();
    let mut snaps = Vec::new();
    qd::run(&ev, &config(1), None, |s| snaps.push(s)).unwrap();
    // 35 iterations at 10 per epoch: three full epochs and a partial fourth
    let epochs: Vec<usize> = snaps.iter().map(|s| s.epoch).collect();
    assert_eq!(epochs, [1, 2, 3, 4]);
    assert_eq!(snaps.iter().filter(|s| s.is_final).count(), 1);
    assert!(snaps.last().unwrap().is_final);
    assert!(snaps.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
}

#[test]
fn epoch_limit_ends_on_a_final_epoch_snapshot() {
    let (grid, art) = setup();
    let ev = DcEvaluator::new(&grid, &art.actions, &art.ptdf, DcConfig::default(), 3, 2).unwrap();
    let cfg = QdConfig {
        max_evaluations: None,
        max_epochs: Some(2),
        ..config(1)
    };
    let mut snaps = Vec::new();
    let out = qd::run(&ev, &cfg, None, |s| snaps.push(s)).unwrap();
    assert_eq!(out.epochs, 2);
    assert_eq!(snaps.len(), 2);
    assert!(snaps[1].is_final && !snaps[0].is_final);
}

#[test]
fn elites_sit_in_their_descriptor_cell() {
    let (grid, art) = setup();
    let ev = DcEvaluator::new(&grid, &art.actions, &art.ptdf, DcConfig::default(), 3, 2).unwrap();
    let cfg = config(9);
    let out = qd::run(&ev, &cfg, None, |_| {}).unwrap();
    let space = cfg.descriptors;
    let mut filled = 0;
    for (cell, elites) in out.repertoire.cells() {
        if elites.is_empty() {
            continue;
        }
        filled += 1;
        assert!(elites.len() <= cfg.cell_capacity);
        assert!(elites.windows(2).all(|w| w[0].score.fitness >= w[1].score.fitness));
        for e in elites {
            assert_eq!(space.cell_of(&e.score), cell);
            assert_eq!(e.score, ev.score(&e.genome));
            assert!(e.genome.validate(&art.actions, 3, 2).is_ok());
        }
    }
    assert!(filled >= 6, "only {filled} cells filled");
}

#[test]
fn empty_action_space_is_a_config_error() {
    let grid = support::fixture("ieee14_congested.json");
    let art = ImportArtifacts::build(&grid, &ImportConfig::default()).unwrap();
    let empty = tto_core::importer::ActionSet::empty(grid.substations.len());
    let ev = DcEvaluator::new(&grid, &empty, &art.ptdf, DcConfig::default(), 3, 2).unwrap();
    assert!(matches!(qd::run(&ev, &config(0), None, |_| {}), Err(tto_core::Error::Config(_))));
}
