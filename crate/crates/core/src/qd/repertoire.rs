//! Descriptor-indexed elite archive.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dc::ScoreVector;
use crate::genome::{Genome, GenomeKey};

/// Descriptor box `{0..=d_max} x {0..=s_max} x {0..=r_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorSpace {
    pub d_max: usize,
    pub s_max: usize,
    pub r_max: usize,
}

impl Default for DescriptorSpace {
    fn default() -> Self {
        DescriptorSpace {
            d_max: 2,
            s_max: 3,
            r_max: 45,
        }
    }
}

impl DescriptorSpace {
    pub fn cell_count(&self) -> usize {
        (self.d_max + 1) * (self.s_max + 1) * (self.r_max + 1)
    }

    /// Cell index of a descriptor triple; components beyond the box clamp
    /// to its edge.
    pub fn cell(&self, lambda_d: usize, lambda_s: usize, lambda_r: usize) -> usize {
        let d = lambda_d.min(self.d_max);
        let s = lambda_s.min(self.s_max);
        let r = lambda_r.min(self.r_max);
        d + (self.d_max + 1) * (s + (self.s_max + 1) * r)
    }

    /// Inverse of [`cell`](Self::cell) on the box.
    pub fn descriptor(&self, cell: usize) -> (usize, usize, usize) {
        let d = cell % (self.d_max + 1);
        let rest = cell / (self.d_max + 1);
        (d, rest % (self.s_max + 1), rest / (self.s_max + 1))
    }

    pub fn cell_of(&self, score: &ScoreVector) -> usize {
        self.cell(score.lambda_d, score.lambda_s, score.lambda_r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elite {
    pub genome: Genome,
    pub score: ScoreVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// The same topology is already stored in the cell.
    Duplicate,
    /// The cell is full and the candidate is no better than its worst.
    Rejected,
    /// Non-finite fitness (islanded genome).
    Invalid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repertoire {
    pub space: DescriptorSpace,
    pub capacity: usize,
    cells: Vec<Vec<Elite>>,
    keys: Vec<HashSet<GenomeKey>>,
}

impl Repertoire {
    pub fn new(space: DescriptorSpace, capacity: usize) -> Self {
        let n = space.cell_count();
        Repertoire {
            space,
            capacity: capacity.max(1),
            cells: vec![Vec::new(); n],
            keys: vec![HashSet::new(); n],
        }
    }

    pub fn insert(&mut self, genome: Genome, score: ScoreVector) -> InsertOutcome {
        if !score.fitness.is_finite() {
            return InsertOutcome::Invalid;
        }
        let cell = self.space.cell_of(&score);
        let key = genome.key();
        if self.keys[cell].contains(&key) {
            return InsertOutcome::Duplicate;
        }
        let list = &mut self.cells[cell];
        if list.len() >= self.capacity && list.last().is_some_and(|w| score.fitness <= w.score.fitness) {
            return InsertOutcome::Rejected;
        }
        // after every equal-fitness entry, so earlier arrivals win ties
        let pos = list.partition_point(|e| e.score.fitness >= score.fitness);
        list.insert(pos, Elite { genome, score });
        self.keys[cell].insert(key);
        if list.len() > self.capacity {
            let dropped = list.pop().expect("over capacity");
            self.keys[cell].remove(&dropped.genome.key());
        }
        InsertOutcome::Inserted
    }

    pub fn cell(&self, index: usize) -> &[Elite] {
        &self.cells[index]
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, &[Elite])> {
        self.cells.iter().enumerate().map(|(i, c)| (i, c.as_slice()))
    }

    pub fn elites(&self) -> impl Iterator<Item = &Elite> {
        self.cells.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn best(&self) -> Option<&Elite> {
        // first maximal entry in cell order, for a deterministic pick
        self.elites().fold(None, |best: Option<&Elite>, e| match best {
            Some(b) if b.score.fitness >= e.score.fitness => Some(b),
            _ => Some(e),
        })
    }

    /// Highest fitness per cell, `None` for empty cells.
    pub fn cell_maxima(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(|c| c.first().map(|e| e.score.fitness)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(fitness: f64) -> ScoreVector {
        ScoreVector {
            lambda_o: -fitness,
            lambda_c: 0,
            lambda_c0: 0,
            lambda_b: 0.0,
            lambda_d: 1,
            lambda_s: 0,
            lambda_r: 0,
            fitness,
            worst: vec![],
            islanded: false,
        }
    }

    fn genome(d: usize) -> Genome {
        Genome {
            actions: vec![],
            disconnections: vec![Some(d)],
        }
    }

    #[test]
    fn default_box_mapping() {
        let s = DescriptorSpace::default();
        assert_eq!(s.cell_count(), 552);
        assert_eq!(s.cell(0, 0, 0), 0);
        assert_eq!(s.cell(1, 2, 0), 7);
        assert_eq!(s.cell(2, 3, 45), 551);
        assert_eq!(s.cell(0, 0, 1000), s.cell(0, 0, 45));
        for c in 0..552 {
            let (d, sp, r) = s.descriptor(c);
            assert_eq!(s.cell(d, sp, r), c);
        }
    }

    #[test]
    fn insert_respects_capacity_and_order() {
        let mut rep = Repertoire::new(DescriptorSpace::default(), 2);
        assert_eq!(rep.insert(genome(0), score(-40.0)), InsertOutcome::Inserted);
        assert_eq!(rep.len(), 1);
        assert_eq!(rep.insert(genome(1), score(-10.0)), InsertOutcome::Inserted);
        assert_eq!(rep.insert(genome(2), score(-50.0)), InsertOutcome::Rejected);
        assert_eq!(rep.insert(genome(0), score(-5.0)), InsertOutcome::Duplicate);
        assert_eq!(rep.insert(genome(3), score(-20.0)), InsertOutcome::Inserted);
        let cell = rep.cell(rep.space.cell(1, 0, 0));
        let f: Vec<f64> = cell.iter().map(|e| e.score.fitness).collect();
        assert_eq!(f, vec![-10.0, -20.0]);
        // the evicted genome may come back
        assert_eq!(rep.insert(genome(0), score(-15.0)), InsertOutcome::Inserted);
    }

    #[test]
    fn non_finite_scores_are_not_stored() {
        let mut rep = Repertoire::new(DescriptorSpace::default(), 4);
        assert_eq!(rep.insert(genome(0), score(f64::NEG_INFINITY)), InsertOutcome::Invalid);
        assert!(rep.is_empty());
    }
}
