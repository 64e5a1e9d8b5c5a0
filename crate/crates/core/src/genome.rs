//! Candidate topology: a fixed number of action slots and disconnection slots.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::importer::ActionSet;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    /// Indices into the action list; `None` is an empty slot.
    pub actions: Vec<Option<usize>>,
    /// Indices into the disconnectable-branch list.
    pub disconnections: Vec<Option<usize>>,
}

/// Order-free identity of a genome: two genomes with the same key describe
/// the same topology.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GenomeKey {
    pub actions: Vec<usize>,
    pub disconnections: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenomeViolation {
    SlotCount,
    ActionOutOfRange(usize),
    DisconnectionOutOfRange(usize),
    SharedSubstation(usize),
    RepeatedBranch(usize),
}

impl Genome {
    pub fn empty(n_actions: usize, n_disconnections: usize) -> Self {
        Genome {
            actions: vec![None; n_actions],
            disconnections: vec![None; n_disconnections],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.actions.iter().chain(&self.disconnections).all(Option::is_none)
    }

    pub fn action_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.actions.iter().flatten().copied()
    }

    pub fn disconnection_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.disconnections.iter().flatten().copied()
    }

    /// Number of non-empty action slots.
    pub fn split_count(&self) -> usize {
        self.action_ids().count()
    }

    pub fn disconnection_count(&self) -> usize {
        self.disconnection_ids().count()
    }

    pub fn key(&self) -> GenomeKey {
        let mut actions: Vec<usize> = self.action_ids().collect();
        let mut disconnections: Vec<usize> = self.disconnection_ids().collect();
        actions.sort_unstable();
        disconnections.sort_unstable();
        GenomeKey {
            actions,
            disconnections,
        }
    }

    /// Checks slot shape and the distinct-substation / distinct-branch rules.
    pub fn validate(
        &self,
        set: &ActionSet,
        n_actions: usize,
        n_disconnections: usize,
    ) -> Result<(), GenomeViolation> {
        if self.actions.len() != n_actions || self.disconnections.len() != n_disconnections {
            return Err(GenomeViolation::SlotCount);
        }
        let mut stations = BTreeSet::new();
        for a in self.action_ids() {
            let action = set.actions.get(a).ok_or(GenomeViolation::ActionOutOfRange(a))?;
            if !stations.insert(action.substation) {
                return Err(GenomeViolation::SharedSubstation(action.substation));
            }
        }
        let mut branches = BTreeSet::new();
        for d in self.disconnection_ids() {
            let branch = *set
                .disconnectables
                .get(d)
                .ok_or(GenomeViolation::DisconnectionOutOfRange(d))?;
            if !branches.insert(branch) {
                return Err(GenomeViolation::RepeatedBranch(branch));
            }
        }
        Ok(())
    }
}

impl GenomeKey {
    /// Symmetric-difference size between the two element sets, with actions
    /// and disconnections tagged apart.
    pub fn distance(&self, other: &GenomeKey) -> usize {
        sorted_symmetric_difference(&self.actions, &other.actions)
            + sorted_symmetric_difference(&self.disconnections, &other.disconnections)
    }
}

fn sorted_symmetric_difference(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    a.len() + b.len() - 2 * common
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let slot = |s: &Option<usize>| s.map_or_else(|| "-".to_string(), |v| v.to_string());
        let a: Vec<String> = self.actions.iter().map(slot).collect();
        let d: Vec<String> = self.disconnections.iter().map(slot).collect();
        write!(f, "a[{}] d[{}]", a.join(","), d.join(","))
    }
}
