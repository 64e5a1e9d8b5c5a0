//! Candidate selection and AC acceptance.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::powerflow::{solve_case, AcCaseResult, SolverOptions};
use crate::dc::ScoreVector;
use crate::genome::{Genome, GenomeKey};
use crate::grid::GridModel;
use crate::importer::ActionSet;
use crate::par;
use crate::qd::{CellEntry, Snapshot};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcConfig {
    pub solver: SolverOptions,
    /// Contingency failures tolerated by the worst-k prefilter.
    pub worst_k_failures: usize,
    /// Fraction of contingencies allowed to diverge in full validation.
    pub nonconvergence_fraction: f64,
    /// Similarity radius (symmetric-difference size).
    pub similarity_distance: usize,
    /// Dominance slack as a fraction of |pre-optimization fitness|.
    pub dominance_tolerance: f64,
    /// Minimum DC improvement as a fraction of |pre-optimization fitness|.
    pub improvement_threshold: f64,
    /// Random pruned candidates queued when no candidate survives.
    pub refill: usize,
    /// Validations per intermediate snapshot.
    pub max_per_snapshot: usize,
    pub seed: u64,
}

impl Default for AcConfig {
    fn default() -> Self {
        AcConfig {
            solver: SolverOptions::default(),
            worst_k_failures: 2,
            nonconvergence_fraction: 0.05,
            similarity_distance: 1,
            dominance_tolerance: 0.01,
            improvement_threshold: 0.05,
            refill: 4,
            max_per_snapshot: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Nonconvergence,
    OverloadNotImproved,
    CriticalCountIncreased,
    EliminatedSimilar,
    EliminatedDominated,
    EliminatedBelowThreshold,
}

impl Reason {
    pub const ALL: [Reason; 6] = [
        Reason::Nonconvergence,
        Reason::OverloadNotImproved,
        Reason::CriticalCountIncreased,
        Reason::EliminatedSimilar,
        Reason::EliminatedDominated,
        Reason::EliminatedBelowThreshold,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Nonconvergence => "nonconvergence",
            Reason::OverloadNotImproved => "overload_not_improved",
            Reason::CriticalCountIncreased => "critical_count_increased",
            Reason::EliminatedSimilar => "eliminated_similar",
            Reason::EliminatedDominated => "eliminated_dominated",
            Reason::EliminatedBelowThreshold => "eliminated_below_threshold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "reason")]
pub enum Verdict {
    Accepted,
    Rejected(Reason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStage {
    Elimination,
    WorstK,
    FullN1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub genome: Genome,
    pub dc: ScoreVector,
    pub stage: ValidationStage,
    #[serde(flatten)]
    pub verdict: Verdict,
    /// AC overload energy over the cases examined, MW.
    pub ac_lambda_o: Option<f64>,
    pub ac_critical: Option<usize>,
    /// Epoch of the snapshot the candidate came from.
    pub epoch: usize,
}

impl ValidationRecord {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    pub fn reason(&self) -> Option<Reason> {
        match self.verdict {
            Verdict::Accepted => None,
            Verdict::Rejected(r) => Some(r),
        }
    }
}

/// AC overload metrics over a set of contingency results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcOverload {
    pub lambda_o: f64,
    pub critical: usize,
    pub converged: usize,
}

/// Overload energy and critical count from the elementwise max loading over
/// the converged cases.
pub fn ac_overload<'a>(grid: &GridModel, cases: impl IntoIterator<Item = &'a AcCaseResult>) -> AcOverload {
    let mut max = vec![0.0f64; grid.branch_count()];
    let mut converged = 0;
    for c in cases {
        if let Some(l) = &c.loading_mva {
            converged += 1;
            for (m, v) in max.iter_mut().zip(l) {
                *m = m.max(*v);
            }
        }
    }
    let mut lambda_o = 0.0;
    let mut critical = 0;
    for (m, b) in max.iter().zip(&grid.branches) {
        if *m > b.limit_mw {
            lambda_o += m - b.limit_mw;
            critical += 1;
        }
    }
    AcOverload {
        lambda_o,
        critical,
        converged,
    }
}

/// AC results of the pre-optimization topology, computed once.
#[derive(Debug, Clone)]
pub struct AcBaseline {
    pub base: AcCaseResult,
    pub cases: Vec<AcCaseResult>,
    pub overload: AcOverload,
}

impl AcBaseline {
    pub fn compute(grid: &GridModel, options: &SolverOptions) -> Self {
        let topo = Topology::base(grid);
        let base = solve_case(grid, &topo, &[], &[], options);
        let cases = solve_contingencies(grid, &topo, &(0..grid.contingencies.len()).collect::<Vec<_>>(), options);
        let overload = ac_overload(grid, &cases);
        AcBaseline { base, cases, overload }
    }

    pub fn overload_over(&self, grid: &GridModel, cases: &[usize]) -> AcOverload {
        ac_overload(grid, cases.iter().map(|&c| &self.cases[c]))
    }
}

fn solve_contingencies(grid: &GridModel, topo: &Topology, cases: &[usize], options: &SolverOptions) -> Vec<AcCaseResult> {
    par::map(cases, |&c| {
        let case = &grid.contingencies[c];
        solve_case(grid, topo, &case.branches, &case.injections, options)
    })
}

/// Outcome of the worst-k prefilter.
#[derive(Debug, Clone, PartialEq)]
pub enum WorstKOutcome {
    Pass,
    Reject(Reason, Option<AcOverload>),
}

/// Context shared by the AC checks of one run.
pub struct AcChecker<'a> {
    pub grid: &'a GridModel,
    pub set: &'a ActionSet,
    pub config: &'a AcConfig,
    pub baseline: &'a AcBaseline,
}

impl AcChecker<'_> {
    /// Base case plus the DC worst-k contingencies.
    pub fn worst_k_check(&self, genome: &Genome, score: &ScoreVector) -> WorstKOutcome {
        let topo = Topology::from_genome(self.grid, self.set, genome);
        let base = solve_case(self.grid, &topo, &[], &[], &self.config.solver);
        if !base.converged {
            return WorstKOutcome::Reject(Reason::Nonconvergence, None);
        }
        let cases: Vec<usize> = score.worst.iter().map(|w| w.case).collect();
        let results = solve_contingencies(self.grid, &topo, &cases, &self.config.solver);
        let ac = ac_overload(self.grid, &results);
        if cases.len() - ac.converged > self.config.worst_k_failures {
            return WorstKOutcome::Reject(Reason::Nonconvergence, Some(ac));
        }
        let pre = self.baseline.overload_over(self.grid, &cases);
        if ac.lambda_o >= pre.lambda_o {
            return WorstKOutcome::Reject(Reason::OverloadNotImproved, Some(ac));
        }
        WorstKOutcome::Pass
    }

    /// Full N-1 acceptance: convergence, strict overload improvement, no
    /// increase in critical branches, checked in that order.
    pub fn full_validation(&self, genome: &Genome) -> (Verdict, Option<AcOverload>) {
        let topo = Topology::from_genome(self.grid, self.set, genome);
        let base = solve_case(self.grid, &topo, &[], &[], &self.config.solver);
        if !base.converged {
            return (Verdict::Rejected(Reason::Nonconvergence), None);
        }
        let all: Vec<usize> = (0..self.grid.contingencies.len()).collect();
        let results = solve_contingencies(self.grid, &topo, &all, &self.config.solver);
        let ac = ac_overload(self.grid, &results);
        let required = (1.0 - self.config.nonconvergence_fraction) * all.len() as f64;
        let verdict = if (ac.converged as f64) < required {
            Verdict::Rejected(Reason::Nonconvergence)
        } else if ac.lambda_o >= self.baseline.overload.lambda_o {
            Verdict::Rejected(Reason::OverloadNotImproved)
        } else if ac.critical > self.baseline.overload.critical {
            Verdict::Rejected(Reason::CriticalCountIncreased)
        } else {
            Verdict::Accepted
        };
        (verdict, Some(ac))
    }
}

/// Result of the elimination heuristics on one candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct Elimination {
    /// Surviving candidate indices, best DC fitness first.
    pub queue: Vec<usize>,
    /// Pruned candidate indices with the first heuristic that removed them.
    pub pruned: Vec<(usize, Reason)>,
}

/// Applies the similarity, dominance and improvement filters in that order.
pub fn eliminate(
    candidates: &[CellEntry],
    validated: &[GenomeKey],
    pre_fitness: f64,
    config: &AcConfig,
) -> Elimination {
    let keys: Vec<GenomeKey> = candidates.iter().map(|c| c.genome.key()).collect();
    let scale = pre_fitness.abs();
    let mut queue = Vec::new();
    let mut pruned = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let similar = validated.iter().any(|v| keys[i].distance(v) <= config.similarity_distance);
        let dominated = || {
            candidates.iter().any(|o| {
                o.score.switching_distance() < c.score.switching_distance()
                    && o.score.fitness >= c.score.fitness - config.dominance_tolerance * scale
            })
        };
        let below = c.score.fitness - pre_fitness < config.improvement_threshold * scale;
        if similar {
            pruned.push((i, Reason::EliminatedSimilar));
        } else if dominated() {
            pruned.push((i, Reason::EliminatedDominated));
        } else if below {
            pruned.push((i, Reason::EliminatedBelowThreshold));
        } else {
            queue.push(i);
        }
    }
    queue.sort_by(|&a, &b| candidates[b].score.fitness.total_cmp(&candidates[a].score.fitness));
    Elimination { queue, pruned }
}

/// Stateful consumer of repertoire snapshots.
pub struct Validator<'a> {
    checker: AcChecker<'a>,
    pre_fitness: f64,
    records: Vec<ValidationRecord>,
    recorded: HashSet<GenomeKey>,
    validated: Vec<GenomeKey>,
    /// Genomes pruned but not yet validated, with their latest reason.
    pending: Vec<(GenomeKey, CellEntry, Reason, usize)>,
    pending_index: HashMap<GenomeKey, usize>,
    snapshots: usize,
}

impl<'a> Validator<'a> {
    pub fn new(
        grid: &'a GridModel,
        set: &'a ActionSet,
        config: &'a AcConfig,
        baseline: &'a AcBaseline,
        pre_fitness: f64,
    ) -> Self {
        Validator {
            checker: AcChecker {
                grid,
                set,
                config,
                baseline,
            },
            pre_fitness,
            records: Vec::new(),
            recorded: HashSet::new(),
            validated: Vec::new(),
            pending: Vec::new(),
            pending_index: HashMap::new(),
            snapshots: 0,
        }
    }

    fn remember_pruned(&mut self, entry: &CellEntry, reason: Reason, epoch: usize) {
        let key = entry.genome.key();
        match self.pending_index.get(&key) {
            Some(&i) => {
                self.pending[i].2 = reason;
                self.pending[i].3 = epoch;
            }
            None => {
                self.pending_index.insert(key.clone(), self.pending.len());
                self.pending.push((key, entry.clone(), reason, epoch));
            }
        }
    }

    fn validate_one(&mut self, entry: &CellEntry, epoch: usize) {
        let key = entry.genome.key();
        let config = self.checker.config;
        if self.validated.iter().any(|v| key.distance(v) <= config.similarity_distance) {
            self.remember_pruned(entry, Reason::EliminatedSimilar, epoch);
            return;
        }
        let record = match self.checker.worst_k_check(&entry.genome, &entry.score) {
            WorstKOutcome::Reject(reason, ac) => ValidationRecord {
                genome: entry.genome.clone(),
                dc: entry.score.clone(),
                stage: ValidationStage::WorstK,
                verdict: Verdict::Rejected(reason),
                ac_lambda_o: ac.map(|a| a.lambda_o),
                ac_critical: ac.map(|a| a.critical),
                epoch,
            },
            WorstKOutcome::Pass => {
                let (verdict, ac) = self.checker.full_validation(&entry.genome);
                ValidationRecord {
                    genome: entry.genome.clone(),
                    dc: entry.score.clone(),
                    stage: ValidationStage::FullN1,
                    verdict,
                    ac_lambda_o: ac.map(|a| a.lambda_o),
                    ac_critical: ac.map(|a| a.critical),
                    epoch,
                }
            }
        };
        self.validated.push(key.clone());
        self.recorded.insert(key);
        self.records.push(record);
    }

    /// Processes one snapshot. Intermediate snapshots validate at most
    /// `max_per_snapshot` candidates; the final one works through its whole
    /// queue until `deadline`.
    pub fn consume(&mut self, snapshot: &Snapshot, deadline: Option<Instant>) {
        self.snapshots += 1;
        let candidates: Vec<CellEntry> = snapshot
            .entries
            .iter()
            .filter(|e| !e.genome.is_empty() && !self.recorded.contains(&e.genome.key()))
            .cloned()
            .collect();
        if candidates.is_empty() {
            return;
        }
        let config = self.checker.config;
        let elim = eliminate(&candidates, &self.validated, self.pre_fitness, config);
        for &(i, reason) in &elim.pruned {
            self.remember_pruned(&candidates[i], reason, snapshot.epoch);
        }
        let mut queue = elim.queue;
        if queue.is_empty() {
            let mut pool: Vec<usize> = elim.pruned.iter().map(|&(i, _)| i).collect();
            let mut rng = crate::rng::stream(config.seed, &[self.snapshots as u64]);
            pool.shuffle(&mut rng);
            pool.truncate(config.refill);
            queue = pool;
        }
        let limit = if snapshot.is_final { usize::MAX } else { config.max_per_snapshot };
        for i in queue.into_iter().take(limit) {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                break;
            }
            self.validate_one(&candidates[i], snapshot.epoch);
        }
    }

    /// Closes the run: every pruned genome that was never validated gets a
    /// record carrying its last elimination reason.
    pub fn finish(mut self) -> Vec<ValidationRecord> {
        for (key, entry, reason, epoch) in std::mem::take(&mut self.pending) {
            if self.recorded.contains(&key) {
                continue;
            }
            self.records.push(ValidationRecord {
                genome: entry.genome,
                dc: entry.score,
                stage: ValidationStage::Elimination,
                verdict: Verdict::Rejected(reason),
                ac_lambda_o: None,
                ac_critical: None,
                epoch,
            });
            self.recorded.insert(key);
        }
        self.records
    }

    pub fn records(&self) -> &[ValidationRecord] {
        &self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(actions: Vec<Option<usize>>, fitness: f64, distance: usize) -> CellEntry {
        CellEntry {
            cell: 0,
            genome: Genome {
                actions,
                disconnections: vec![],
            },
            score: ScoreVector {
                lambda_o: -fitness,
                lambda_c: 0,
                lambda_c0: 0,
                lambda_b: 0.0,
                lambda_d: 0,
                lambda_s: distance,
                lambda_r: 0,
                fitness,
                worst: vec![],
                islanded: false,
            },
        }
    }

    #[test]
    fn exact_duplicate_is_similar() {
        let c = vec![entry(vec![Some(1)], -10.0, 1)];
        let e = eliminate(&c, &[c[0].genome.key()], -100.0, &AcConfig::default());
        assert_eq!(e.pruned, vec![(0, Reason::EliminatedSimilar)]);
        assert!(e.queue.is_empty());
    }

    #[test]
    fn larger_switching_distance_is_dominated() {
        let c = vec![
            entry(vec![Some(1), None], -10.0, 1),
            entry(vec![Some(2), Some(3)], -10.0, 2),
        ];
        let e = eliminate(&c, &[], -100.0, &AcConfig::default());
        assert_eq!(e.queue, vec![0]);
        assert_eq!(e.pruned, vec![(1, Reason::EliminatedDominated)]);
    }

    #[test]
    fn small_improvement_is_below_threshold() {
        let c = vec![entry(vec![Some(1)], -98.0, 1)];
        let e = eliminate(&c, &[], -100.0, &AcConfig::default());
        assert_eq!(e.pruned, vec![(0, Reason::EliminatedBelowThreshold)]);
    }

    #[test]
    fn verdict_serializes_flat() {
        let v = serde_json::to_value(Verdict::Rejected(Reason::Nonconvergence)).unwrap();
        assert_eq!(v, serde_json::json!({"verdict": "rejected", "reason": "nonconvergence"}));
        let a = serde_json::to_value(Verdict::Accepted).unwrap();
        assert_eq!(a, serde_json::json!({"verdict": "accepted"}));
    }
}
