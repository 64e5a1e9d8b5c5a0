//! Penalty metrics and fitness.

use serde::{Deserialize, Serialize};

use super::screen::FlowResult;
use super::DcConfig;
use crate::genome::Genome;
use crate::importer::ActionSet;

/// One entry of the worst-contingency list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    /// Index into the grid's contingency list.
    pub case: usize,
    /// Overload energy in MW.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    /// N-1 overload energy, MW.
    pub lambda_o: f64,
    /// Branches overloaded in some contingency.
    pub lambda_c: usize,
    /// Branches overloaded in the base case.
    pub lambda_c0: usize,
    /// Busbar-outage overload energy, MW.
    pub lambda_b: f64,
    pub lambda_d: usize,
    pub lambda_s: usize,
    pub lambda_r: usize,
    pub fitness: f64,
    pub worst: Vec<WorstCase>,
    /// The genome strands injection; fitness is `-inf`.
    #[serde(default)]
    pub islanded: bool,
}

impl ScoreVector {
    /// Switching distance used by dominance checks.
    pub fn switching_distance(&self) -> usize {
        self.lambda_d + self.lambda_s + self.lambda_r
    }

    pub(crate) fn islanded(genome: &Genome, set: &ActionSet) -> Self {
        ScoreVector {
            lambda_o: f64::INFINITY,
            lambda_c: 0,
            lambda_c0: 0,
            lambda_b: f64::INFINITY,
            lambda_d: genome.disconnection_count(),
            lambda_s: genome.split_count(),
            lambda_r: reassignments(genome, set),
            fitness: f64::NEG_INFINITY,
            worst: Vec::new(),
            islanded: true,
        }
    }
}

fn reassignments(genome: &Genome, set: &ActionSet) -> usize {
    genome.action_ids().map(|a| set.actions[a].reassignment).sum()
}

fn clip(x: f64) -> f64 {
    x.max(0.0)
}

/// Aggregates screened flows into the metric vector.
pub fn compute_scores(
    flows: &FlowResult,
    limits: &[f64],
    genome: &Genome,
    set: &ActionSet,
    config: &DcConfig,
    lambda_b_pre: f64,
) -> ScoreVector {
    let penalty = config.islanding_penalty_mw;
    let islanded_cases = flows.case_islanded.iter().filter(|&&i| i).count();
    let islanded_busbar = flows.busbar_islanded.iter().filter(|&&i| i).count();

    let lambda_o = flows.f_max.iter().zip(limits).map(|(f, l)| clip(f - l)).sum::<f64>()
        + penalty * islanded_cases as f64;
    let lambda_c = flows.f_max.iter().zip(limits).filter(|(f, l)| f > l).count();
    let lambda_c0 = flows.f_n0.iter().zip(limits).filter(|(f, l)| f.abs() > **l).count();
    let lambda_b = flows.f_busbar_max.iter().zip(limits).map(|(f, l)| clip(f - l)).sum::<f64>()
        + penalty * islanded_busbar as f64;

    let mut fitness = -(lambda_o + config.weight_n0 * lambda_c0 as f64 + config.weight_critical * lambda_c as f64);
    if config.fitness_variant == FitnessVariant::BusbarAware {
        fitness -= clip(lambda_b - lambda_b_pre);
    }

    let mut worst: Vec<WorstCase> = flows
        .case_energy
        .iter()
        .enumerate()
        .map(|(case, &energy)| WorstCase { case, energy })
        .collect();
    worst.sort_by(|a, b| b.energy.total_cmp(&a.energy).then(a.case.cmp(&b.case)));
    worst.truncate(config.worst_k);

    ScoreVector {
        lambda_o,
        lambda_c,
        lambda_c0,
        lambda_b,
        lambda_d: genome.disconnection_count(),
        lambda_s: genome.split_count(),
        lambda_r: reassignments(genome, set),
        fitness,
        worst,
        islanded: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessVariant {
    /// Overload energy and critical-branch counts.
    #[default]
    Overload,
    /// Additionally penalizes busbar-outage deterioration.
    BusbarAware,
}
