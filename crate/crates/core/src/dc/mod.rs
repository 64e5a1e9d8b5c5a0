//! DC scoring of candidate topologies.

mod operator;
mod score;
mod screen;

use serde::{Deserialize, Serialize};

use crate::genome::Genome;
use crate::grid::GridModel;
use crate::importer::ActionSet;
use crate::par;
use crate::ptdf::PtdfMatrix;
use crate::topology::Topology;
use crate::Result;

pub use operator::{FlowMethod, FlowOperator, DEAD_TOLERANCE, GROUND};
pub use score::{compute_scores, FitnessVariant, ScoreVector, WorstCase};
pub use screen::{screen_contingencies, FlowResult, Outage, Screener};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcConfig {
    /// Weight on base-case critical branches.
    pub weight_n0: f64,
    /// Weight on contingency critical branches.
    pub weight_critical: f64,
    pub fitness_variant: FitnessVariant,
    /// Overload energy charged to an outage that islands injection.
    pub islanding_penalty_mw: f64,
    /// Length of the worst-contingency list.
    pub worst_k: usize,
    pub method: FlowMethod,
}

impl Default for DcConfig {
    fn default() -> Self {
        DcConfig {
            weight_n0: 200.0,
            weight_critical: 50.0,
            fitness_variant: FitnessVariant::Overload,
            islanding_penalty_mw: 10_000.0,
            worst_k: 20,
            method: FlowMethod::LowRank,
        }
    }
}

/// Flow operator for the topology a genome describes, or `Ok(None)` when the
/// genome strands injection away from the slack.
pub fn apply_topology(
    grid: &GridModel,
    ptdf: &PtdfMatrix,
    set: &ActionSet,
    genome: &Genome,
    method: FlowMethod,
) -> Result<Option<(Topology, FlowOperator)>> {
    let topo = Topology::from_genome(grid, set, genome);
    Ok(FlowOperator::new(grid, ptdf, &topo, method)?.map(|op| (topo, op)))
}

/// Scores genomes against one grid and action set.
#[derive(Debug, Clone)]
pub struct DcEvaluator<'a> {
    pub grid: &'a GridModel,
    pub set: &'a ActionSet,
    pub ptdf: &'a PtdfMatrix,
    pub config: DcConfig,
    limits: Vec<f64>,
    lambda_b_pre: f64,
    pre_score: ScoreVector,
    n_actions: usize,
    n_disconnections: usize,
}

impl<'a> DcEvaluator<'a> {
    /// Builds the evaluator and scores the unmodified topology. Genomes fed
    /// to it must have `n_actions` action slots and `n_disconnections`
    /// disconnection slots.
    pub fn new(
        grid: &'a GridModel,
        set: &'a ActionSet,
        ptdf: &'a PtdfMatrix,
        config: DcConfig,
        n_actions: usize,
        n_disconnections: usize,
    ) -> Result<Self> {
        let mut ev = DcEvaluator {
            grid,
            set,
            ptdf,
            config,
            limits: grid.limits(),
            lambda_b_pre: 0.0,
            pre_score: ScoreVector::islanded(&Genome::empty(0, 0), set),
            n_actions,
            n_disconnections,
        };
        let empty = Genome::empty(n_actions, n_disconnections);
        let first = ev.try_score(&empty)?;
        ev.lambda_b_pre = first.lambda_b;
        ev.pre_score = ev.try_score(&empty)?;
        Ok(ev)
    }

    /// Score of the pre-optimization topology.
    pub fn pre_score(&self) -> &ScoreVector {
        &self.pre_score
    }

    pub fn lambda_b_pre(&self) -> f64 {
        self.lambda_b_pre
    }

    pub fn empty_genome(&self) -> Genome {
        Genome::empty(self.n_actions, self.n_disconnections)
    }

    pub fn slot_counts(&self) -> (usize, usize) {
        (self.n_actions, self.n_disconnections)
    }

    fn try_score(&self, genome: &Genome) -> Result<ScoreVector> {
        let Some((topo, op)) = apply_topology(self.grid, self.ptdf, self.set, genome, self.config.method)? else {
            return Ok(ScoreVector::islanded(genome, self.set));
        };
        let flows = screen_contingencies(self.grid, self.set, &topo, &op, self.config.islanding_penalty_mw);
        Ok(compute_scores(&flows, &self.limits, genome, self.set, &self.config, self.lambda_b_pre))
    }

    /// Full screening result for a genome, `None` if it islands.
    pub fn flows(&self, genome: &Genome) -> Option<FlowResult> {
        let (topo, op) = apply_topology(self.grid, self.ptdf, self.set, genome, self.config.method).ok()??;
        Some(screen_contingencies(self.grid, self.set, &topo, &op, self.config.islanding_penalty_mw))
    }

    /// Scores one genome. A numerically singular update (never expected for
    /// a topology that passed the islanding check) is scored like an
    /// islanded genome.
    pub fn score(&self, genome: &Genome) -> ScoreVector {
        self.try_score(genome)
            .unwrap_or_else(|_| ScoreVector::islanded(genome, self.set))
    }

    /// Scores a batch; element `i` belongs to genome `i`.
    pub fn evaluate_batch(&self, genomes: &[Genome]) -> Vec<ScoreVector> {
        par::map(genomes, |g| self.score(g))
    }

    pub fn evaluate_batch_sequential(&self, genomes: &[Genome]) -> Vec<ScoreVector> {
        genomes.iter().map(|g| self.score(g)).collect()
    }

    /// Pads the batch with empty genomes up to a multiple of `b`, scores it
    /// and drops the padding.
    pub fn evaluate_padded(&self, genomes: &[Genome], b: usize) -> Vec<ScoreVector> {
        let b = b.max(1);
        let padded_len = genomes.len().div_ceil(b) * b;
        let mut batch = genomes.to_vec();
        batch.resize(padded_len, self.empty_genome());
        let mut scores = self.evaluate_batch(&batch);
        scores.truncate(genomes.len());
        scores
    }
}
