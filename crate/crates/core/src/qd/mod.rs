//! Batched MapElites search over genomes.

mod operators;
mod repertoire;

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dc::{DcEvaluator, ScoreVector};
use crate::genome::Genome;
use crate::rng::stream;
use crate::{par, Error, Result};

pub use operators::{crossover, mutate, mutate_traced, MutationConfig, MutationEvent, Op, Stage};
pub use repertoire::{DescriptorSpace, Elite, InsertOutcome, Repertoire};

const ITERATION_STREAM: u64 = 1;
const LANE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QdConfig {
    /// Action slots per genome.
    pub n_actions: usize,
    /// Disconnection slots per genome.
    pub n_disconnections: usize,
    /// Offspring per iteration.
    pub batch_size: usize,
    pub iters_per_epoch: usize,
    /// Elites kept per cell.
    pub cell_capacity: usize,
    pub mutation: MutationConfig,
    /// Probability that a crossover slot draws from the first parent.
    pub p_c1: f64,
    pub descriptors: DescriptorSpace,
    /// Stop before an iteration would push evaluations past this count.
    pub max_evaluations: Option<u64>,
    pub max_epochs: Option<usize>,
    pub time_limit_seconds: Option<f64>,
    pub seed: u64,
}

impl Default for QdConfig {
    fn default() -> Self {
        QdConfig {
            n_actions: 3,
            n_disconnections: 2,
            batch_size: 64,
            iters_per_epoch: 500,
            cell_capacity: 4,
            mutation: MutationConfig::default(),
            p_c1: 0.75,
            descriptors: DescriptorSpace::default(),
            max_evaluations: None,
            max_epochs: None,
            time_limit_seconds: None,
            seed: 0,
        }
    }
}

impl QdConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if self.iters_per_epoch == 0 {
            return fail("iters_per_epoch must be positive");
        }
        if self.cell_capacity == 0 {
            return fail("cell_capacity must be positive");
        }
        if self.n_disconnections > self.descriptors.d_max || self.n_actions > self.descriptors.s_max {
            return fail("slot counts exceed the descriptor ranges");
        }
        if !(0.0..=1.0).contains(&self.p_c1) {
            return fail("p_c1 must lie in [0, 1]");
        }
        let weights_ok = |w: &[f64; 4]| w.iter().all(|x| x.is_finite() && *x >= 0.0) && w.iter().sum::<f64>() > 0.0;
        if !weights_ok(&self.mutation.p_action) || !weights_ok(&self.mutation.p_disconnection) {
            return fail("mutation weights must be non-negative with a positive sum");
        }
        if !(self.mutation.mean_ops.is_finite() && self.mutation.mean_ops > 0.0) {
            return fail("mean_ops must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub cell: usize,
    pub genome: Genome,
    pub score: ScoreVector,
}

/// Immutable view of the repertoire handed to the validator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub epoch: usize,
    pub evaluations: u64,
    pub best_fitness: f64,
    pub is_final: bool,
    pub entries: Vec<CellEntry>,
}

impl Snapshot {
    fn of(rep: &Repertoire, epoch: usize, evaluations: u64, is_final: bool) -> Self {
        let entries = rep
            .cells()
            .flat_map(|(cell, elites)| {
                elites.iter().map(move |e| CellEntry {
                    cell,
                    genome: e.genome.clone(),
                    score: e.score.clone(),
                })
            })
            .collect();
        Snapshot {
            epoch,
            evaluations,
            best_fitness: rep.best().map_or(f64::NEG_INFINITY, |e| e.score.fitness),
            is_final,
            entries,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluations: u64,
    pub best_fitness: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub repertoire: Repertoire,
    pub evaluations: u64,
    pub epochs: usize,
    pub iterations: u64,
    /// Best fitness whenever it improved, plus one point per epoch end.
    pub trace: Vec<TracePoint>,
    /// Per epoch end, the best fitness of every cell.
    pub cell_history: Vec<Vec<Option<f64>>>,
    pub elapsed: Duration,
}

struct Budget {
    max_evaluations: Option<u64>,
    max_epochs: Option<usize>,
    deadline: Option<Instant>,
}

impl Budget {
    fn allows_iteration(&self, evaluations: u64, batch: u64, epochs_done: usize, fresh_epoch: bool) -> bool {
        if self.max_evaluations.is_some_and(|m| evaluations + batch > m) {
            return false;
        }
        if fresh_epoch && self.max_epochs.is_some_and(|m| epochs_done >= m) {
            return false;
        }
        !self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

/// Runs the search. `sink` receives a snapshot after every epoch and a final
/// one (flagged) when the budget runs out. `deadline` caps wall time in
/// addition to `config.time_limit_seconds`.
pub fn run(
    evaluator: &DcEvaluator<'_>,
    config: &QdConfig,
    deadline: Option<Instant>,
    mut sink: impl FnMut(Snapshot),
) -> Result<RunOutcome> {
    config.validate()?;
    if evaluator.set.is_empty() {
        return Err(Error::Config("no actions and no disconnectable branches to search".into()));
    }
    if evaluator.slot_counts() != (config.n_actions, config.n_disconnections) {
        return Err(Error::Config("evaluator slot counts differ from the search config".into()));
    }
    let start = Instant::now();
    let own_deadline = config
        .time_limit_seconds
        .map(|s| start + Duration::from_secs_f64(s.max(0.0)));
    let budget = Budget {
        max_evaluations: config.max_evaluations,
        max_epochs: config.max_epochs,
        deadline: match (deadline, own_deadline) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        },
    };

    let mut rep = Repertoire::new(config.descriptors, config.cell_capacity);
    let seed = evaluator.empty_genome();
    rep.insert(seed, evaluator.pre_score().clone());
    let mut evaluations: u64 = 1;
    let mut best = evaluator.pre_score().fitness;
    let mut trace = vec![TracePoint {
        evaluations,
        best_fitness: best,
    }];
    let mut cell_history = Vec::new();
    let b = config.batch_size;
    let mut iterations: u64 = 0;
    let mut epochs = 0usize;
    let mut iter_in_epoch = 0usize;

    while budget.allows_iteration(evaluations, b as u64, epochs, iter_in_epoch == 0) {
        let parents: Vec<&Genome> = rep.elites().map(|e| &e.genome).collect();
        let b_mc = stream(config.seed, &[ITERATION_STREAM, iterations]).random_range(0..=b);
        let offspring: Vec<Genome> = par::map_indices(b, |lane| {
            let mut rng = stream(config.seed, &[LANE_STREAM, iterations, lane as u64]);
            if lane < b_mc {
                let parent = parents[rng.random_range(0..parents.len())];
                mutate(parent, evaluator.set, &config.mutation, &mut rng)
            } else {
                let p1 = parents[rng.random_range(0..parents.len())];
                let p2 = parents[rng.random_range(0..parents.len())];
                crossover(p1, p2, config.p_c1, evaluator.set, &mut rng)
            }
        });
        let scores = evaluator.evaluate_batch(&offspring);
        for (lane, (genome, score)) in offspring.into_iter().zip(scores).enumerate() {
            let fitness = score.fitness;
            if rep.insert(genome, score) == InsertOutcome::Inserted && fitness > best {
                best = fitness;
                trace.push(TracePoint {
                    evaluations: evaluations + lane as u64 + 1,
                    best_fitness: best,
                });
            }
        }
        evaluations += b as u64;
        iterations += 1;
        iter_in_epoch += 1;

        if iter_in_epoch == config.iters_per_epoch {
            iter_in_epoch = 0;
            epochs += 1;
            trace.push(TracePoint {
                evaluations,
                best_fitness: best,
            });
            cell_history.push(rep.cell_maxima());
            let more = budget.allows_iteration(evaluations, b as u64, epochs, true);
            sink(Snapshot::of(&rep, epochs, evaluations, !more));
            if !more {
                return Ok(RunOutcome {
                    repertoire: rep,
                    evaluations,
                    epochs,
                    iterations,
                    trace,
                    cell_history,
                    elapsed: start.elapsed(),
                });
            }
        }
    }

    // budget ran out mid-epoch (or before any iteration)
    if iter_in_epoch > 0 {
        trace.push(TracePoint {
            evaluations,
            best_fitness: best,
        });
        cell_history.push(rep.cell_maxima());
    }
    sink(Snapshot::of(&rep, epochs + usize::from(iter_in_epoch > 0), evaluations, true));
    Ok(RunOutcome {
        repertoire: rep,
        evaluations,
        epochs,
        iterations,
        trace,
        cell_history,
        elapsed: start.elapsed(),
    })
}
