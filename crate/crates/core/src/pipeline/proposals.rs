//! Candidate boxes: jittered copies of ground truth, halves of large
//! objects, and background boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::{Scene, TABLE, WALL};
use crate::error::{Error, Result};
use crate::geom3d::{iou3d, Aabb3};
use crate::relations::{AnnotatedObject, BACKGROUND};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    /// Jittered copies per ground-truth object.
    pub copies: usize,
    /// Center noise as a fraction of the box size on each axis.
    pub center_jitter: f64,
    /// Standard deviation of the log side-length noise.
    pub size_jitter: f64,
    /// Background boxes per scene.
    pub negatives: usize,
    /// Chance that a wall or table also yields its two halves.
    pub fragment_prob: f64,
    /// IoU at which a proposal inherits the identity of a ground-truth object.
    pub match_iou: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self { copies: 4, center_jitter: 0.08, size_jitter: 0.08, negatives: 6, fragment_prob: 0.3, match_iou: 0.25 }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.copies == 0 {
            return Err(Error::Config("copies_per_object must be at least 1".into()));
        }
        for (name, v) in [("center_jitter", self.center_jitter), ("size_jitter", self.size_jitter)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.fragment_prob) {
            return Err(Error::Config(format!("fragment_prob must lie in [0, 1], got {}", self.fragment_prob)));
        }
        if !(self.match_iou > 0.0 && self.match_iou <= 1.0) {
            return Err(Error::Config(format!("match_iou must lie in (0, 1], got {}", self.match_iou)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub bbox: Aabb3<f64>,
    /// Ground-truth object this proposal stands for, when best IoU reaches the match threshold.
    pub matched_gt: Option<usize>,
    /// Best IoU against any ground-truth object.
    pub best_iou: f64,
}

impl Proposal {
    pub fn new(scene: &Scene, bbox: Aabb3<f64>, match_iou: f64) -> Self {
        let best_iou = scene.objects.iter().map(|o| iou3d(&bbox, &o.bbox)).fold(0.0, f64::max);
        let matched_gt = scene.best_match(&bbox, match_iou).map(|(i, _)| i);
        Self { bbox, matched_gt, best_iou }
    }

    /// The proposal as an annotated object: inherited class and instance, or
    /// the background sentinel.
    pub fn as_object(&self, scene: &Scene) -> AnnotatedObject<f64> {
        match self.matched_gt {
            Some(i) => {
                let gt = &scene.objects[i];
                AnnotatedObject { bbox: self.bbox, class_id: gt.class_id, instance_id: gt.instance_id }
            }
            None => AnnotatedObject { bbox: self.bbox, class_id: BACKGROUND, instance_id: BACKGROUND },
        }
    }
}

/// Seeded proposals for one scene: per object `copies` jittered boxes (the
/// first of them exact when both jitters are zero), optional halves of walls
/// and tables, then background boxes with IoU below `match_iou` to every
/// object.
pub fn generate_proposals(scene: &Scene, seed: u64, cfg: &ProposalConfig) -> Result<Vec<Proposal>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut boxes = Vec::new();
    for o in &scene.objects {
        let (c, s) = (o.bbox.center(), o.bbox.size());
        for _ in 0..cfg.copies {
            let mut center = c;
            let mut size = s;
            for a in 0..3 {
                center[a] += cfg.center_jitter * s[a] * unit.sample(&mut rng);
                size[a] *= (cfg.size_jitter * unit.sample(&mut rng)).exp();
            }
            boxes.push(Aabb3::from_center_size(center, size)?);
        }
        if (o.class_id == WALL || o.class_id == TABLE) && rng.random_bool(cfg.fragment_prob) {
            let (a, b) = o.bbox.split_longest();
            boxes.push(a);
            boxes.push(b);
        }
    }

    let (lo, hi) = (scene.room.min(), scene.room.max());
    let mut placed = 0;
    let mut attempts = 0;
    while placed < cfg.negatives && attempts < 200 * cfg.negatives.max(1) {
        attempts += 1;
        let size: [f64; 3] = std::array::from_fn(|a| rng.random_range(0.2..1.0f64).min(hi[a] - lo[a]));
        let min: [f64; 3] = std::array::from_fn(|a| rng.random_range(lo[a]..=hi[a] - size[a]));
        let b = Aabb3::new(min, std::array::from_fn(|a| min[a] + size[a]))?;
        if scene.objects.iter().all(|o| iou3d(&b, &o.bbox) < cfg.match_iou) {
            boxes.push(b);
            placed += 1;
        }
    }

    Ok(boxes.into_iter().map(|b| Proposal::new(scene, b, cfg.match_iou)).collect())
}
