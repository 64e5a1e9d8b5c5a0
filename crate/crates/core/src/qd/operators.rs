//! Mutation and crossover over genomes.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::genome::Genome;
use crate::importer::ActionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Add,
    Remove,
    Change,
    Identity,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Remove, Op::Change, Op::Identity];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Action,
    Disconnection,
}

/// One operation drawn during a mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutationEvent {
    pub stage: Stage,
    pub op: Op,
    /// Every operation with positive weight was feasible, so the draw
    /// followed the configured weights unchanged.
    pub unrestricted: bool,
    /// Chosen by the empty-genome rule rather than drawn.
    pub forced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationConfig {
    /// Mean of the Poisson draw for the number of action operations.
    pub mean_ops: f64,
    /// Weights for (add, remove, change, identity) on action slots.
    pub p_action: [f64; 4],
    /// Weights for (add, remove, change, identity) on disconnection slots.
    pub p_disconnection: [f64; 4],
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            mean_ops: 2.0,
            p_action: [0.2, 0.2, 0.5, 0.1],
            p_disconnection: [0.25, 0.25, 0.5, 0.0],
        }
    }
}

/// Picks from `weights` restricted to `feasible`; Identity when nothing
/// feasible has weight.
fn draw<R: Rng + ?Sized>(weights: &[f64; 4], feasible: [bool; 4], rng: &mut R) -> Op {
    let total: f64 = (0..4).filter(|&i| feasible[i]).map(|i| weights[i]).sum();
    if total <= 0.0 {
        return Op::Identity;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = Op::Identity;
    for op in Op::ALL {
        if !feasible[op.index()] || weights[op.index()] <= 0.0 {
            continue;
        }
        last = op;
        if u < weights[op.index()] {
            return op;
        }
        u -= weights[op.index()];
    }
    last
}

fn pick<T: Copy, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> T {
    items[rng.random_range(0..items.len())]
}

fn filled_slots(slots: &[Option<usize>]) -> Vec<usize> {
    (0..slots.len()).filter(|&i| slots[i].is_some()).collect()
}

fn action_stage<R: Rng + ?Sized>(
    g: &mut Genome,
    set: &ActionSet,
    weights: &[f64; 4],
    rng: &mut R,
    events: &mut Vec<MutationEvent>,
) {
    let used: Vec<usize> = g.action_ids().map(|a| set.station_of(a)).collect();
    let addable: Vec<usize> = set
        .splittable_stations()
        .into_iter()
        .filter(|s| !used.contains(s))
        .collect();
    let has_empty = g.actions.iter().any(Option::is_none);
    let filled = filled_slots(&g.actions);
    let current: Vec<usize> = g.action_ids().collect();
    let change_pool: Vec<usize> = used
        .iter()
        .flat_map(|&s| set.actions_of(s))
        .filter(|a| !current.contains(a))
        .collect();

    let feasible = [has_empty && !addable.is_empty(), !filled.is_empty(), !change_pool.is_empty(), true];
    let op = draw(weights, feasible, rng);
    events.push(MutationEvent {
        stage: Stage::Action,
        op,
        unrestricted: (0..4).all(|i| feasible[i] || weights[i] <= 0.0),
        forced: false,
    });
    match op {
        Op::Add => {
            let station = pick(&addable, rng);
            let action = pick(&set.actions_of(station).collect::<Vec<_>>(), rng);
            let slot = g.actions.iter().position(Option::is_none).expect("feasible");
            g.actions[slot] = Some(action);
        }
        Op::Remove => g.actions[pick(&filled, rng)] = None,
        Op::Change => {
            let action = pick(&change_pool, rng);
            let station = set.station_of(action);
            let slot = g
                .actions
                .iter()
                .position(|a| a.is_some_and(|a| set.station_of(a) == station))
                .expect("station in use");
            g.actions[slot] = Some(action);
        }
        Op::Identity => {}
    }
}

fn disconnection_stage<R: Rng + ?Sized>(
    g: &mut Genome,
    set: &ActionSet,
    weights: &[f64; 4],
    rng: &mut R,
    events: &mut Vec<MutationEvent>,
) {
    let current: Vec<usize> = g.disconnection_ids().collect();
    let unused: Vec<usize> = (0..set.disconnectables.len()).filter(|d| !current.contains(d)).collect();
    let has_empty = g.disconnections.iter().any(Option::is_none);
    let filled = filled_slots(&g.disconnections);
    let feasible = [has_empty && !unused.is_empty(), !filled.is_empty(), !filled.is_empty() && !unused.is_empty(), true];

    let forced = g.is_empty() && feasible[Op::Add.index()];
    let op = if forced { Op::Add } else { draw(weights, feasible, rng) };
    events.push(MutationEvent {
        stage: Stage::Disconnection,
        op,
        unrestricted: (0..4).all(|i| feasible[i] || weights[i] <= 0.0),
        forced,
    });
    match op {
        Op::Add => {
            let slot = g.disconnections.iter().position(Option::is_none).expect("feasible");
            g.disconnections[slot] = Some(pick(&unused, rng));
        }
        Op::Remove => g.disconnections[pick(&filled, rng)] = None,
        Op::Change => {
            let slot = pick(&filled, rng);
            g.disconnections[slot] = Some(pick(&unused, rng));
        }
        Op::Identity => {}
    }
}

/// Mutates `g`, recording every operation drawn.
pub fn mutate_traced<R: Rng + ?Sized>(
    g: &Genome,
    set: &ActionSet,
    config: &MutationConfig,
    rng: &mut R,
    events: &mut Vec<MutationEvent>,
) -> Genome {
    let mut out = g.clone();
    let n_a = out.actions.len();
    if n_a > 0 {
        let n_mut = match Poisson::new(config.mean_ops) {
            Ok(p) => (p.sample(rng) as usize).clamp(1, n_a),
            Err(_) => 1,
        };
        for _ in 0..n_mut {
            action_stage(&mut out, set, &config.p_action, rng, events);
        }
    }
    if !out.disconnections.is_empty() {
        disconnection_stage(&mut out, set, &config.p_disconnection, rng, events);
    }
    out
}

pub fn mutate<R: Rng + ?Sized>(g: &Genome, set: &ActionSet, config: &MutationConfig, rng: &mut R) -> Genome {
    mutate_traced(g, set, config, rng, &mut Vec::new())
}

/// Fills each offspring slot from parent 1 with probability `p_c1`, else
/// from parent 2, drawing without replacement among that parent's entries
/// that keep the offspring valid. A slot whose chosen pool is exhausted
/// stays empty.
pub fn crossover<R: Rng + ?Sized>(g1: &Genome, g2: &Genome, p_c1: f64, set: &ActionSet, rng: &mut R) -> Genome {
    let p_c1 = p_c1.clamp(0.0, 1.0);
    let mut child = Genome::empty(g1.actions.len(), g1.disconnections.len());

    let mut stations = Vec::new();
    for slot in 0..child.actions.len() {
        let parent = if rng.random_bool(p_c1) { g1 } else { g2 };
        let pool: Vec<usize> = parent
            .action_ids()
            .filter(|&a| !stations.contains(&set.station_of(a)))
            .collect();
        if !pool.is_empty() {
            let a = pick(&pool, rng);
            stations.push(set.station_of(a));
            child.actions[slot] = Some(a);
        }
    }

    let mut taken = Vec::new();
    for slot in 0..child.disconnections.len() {
        let parent = if rng.random_bool(p_c1) { g1 } else { g2 };
        let pool: Vec<usize> = parent.disconnection_ids().filter(|d| !taken.contains(d)).collect();
        if !pool.is_empty() {
            let d = pick(&pool, rng);
            taken.push(d);
            child.disconnections[slot] = Some(d);
        }
    }
    child
}
