//! Per-relation confusion counts from pair logits thresholded at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relations::Relation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `None` when there are no samples.
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `None` when there are no positive targets.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub relation: Relation,
    pub counts: Confusion,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Metrics for the four relations, in [`Relation::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub counts: [Confusion; 4],
}

impl RelationMetrics {
    /// Accumulates one batch. A logit predicts true only when strictly positive.
    pub fn update(&mut self, pair_logits: &[Vec<f64>; 4], targets: &[Vec<bool>; 4]) -> Result<()> {
        for r in 0..4 {
            if pair_logits[r].len() != targets[r].len() {
                return Err(Error::dims("relation_metrics targets", pair_logits[r].len(), targets[r].len()));
            }
        }
        for r in 0..4 {
            let c = &mut self.counts[r];
            for (&z, &y) in pair_logits[r].iter().zip(&targets[r]) {
                match (z > 0.0, y) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, false) => c.tn += 1,
                    (false, true) => c.fn_ += 1,
                }
            }
        }
        Ok(())
    }

    pub fn scores(&self) -> [RelationScore; 4] {
        Relation::ALL.map(|relation| {
            let counts = self.counts[relation.index()];
            RelationScore { relation, counts, accuracy: counts.accuracy(), precision: counts.precision(), recall: counts.recall() }
        })
    }

    pub fn accuracy(&self, r: Relation) -> Option<f64> {
        self.counts[r.index()].accuracy()
    }
}

pub fn relation_metrics(pair_logits: &[Vec<f64>; 4], targets: &[Vec<bool>; 4]) -> Result<RelationMetrics> {
    let mut m = RelationMetrics::default();
    m.update(pair_logits, targets)?;
    Ok(m)
}
