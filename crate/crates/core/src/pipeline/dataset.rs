//! Scenes turned into training-ready tensors.

use super::features::extract_features;
use super::heads::encode_box;
use super::loss::DetectionTargets;
use super::proposals::{generate_proposals, Proposal};
use super::scene::{generate_scene, Scene, BACKGROUND_CLASS};
use super::{derive_seed, Stream};
use crate::config::RunConfig;
use crate::error::Result;
use crate::neural::Tensor2;
use crate::pairing::{build_pairs, PairSet};
use crate::relations::{relation_labels_batch, AnnotatedObject};

#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub scene: Scene,
    pub proposals: Vec<Proposal>,
    /// Proposals with inherited class and instance (or the background sentinel).
    pub objects: Vec<AnnotatedObject<f64>>,
    pub centers: Vec<[f64; 3]>,
    pub features: Tensor2<f64>,
    pub targets: DetectionTargets<f64>,
}

/// Proposals, features and targets for `scene`. `index` selects the seed
/// streams, so one scene index always yields the same proposals.
pub fn prepare_scene(scene: Scene, cfg: &RunConfig, index: u64) -> Result<PreparedScene> {
    let proposals = generate_proposals(&scene, derive_seed(cfg.seed, Stream::Proposals, index), &cfg.proposals())?;
    let features = extract_features(&scene, &proposals, cfg.feature_noise, derive_seed(cfg.seed, Stream::Features, index))?;
    let objects = proposals.iter().map(|p| p.as_object(&scene)).collect();
    let centers = proposals.iter().map(|p| p.bbox.center()).collect();
    let mut classes = Vec::with_capacity(proposals.len());
    let mut boxes = Vec::with_capacity(proposals.len());
    for p in &proposals {
        classes.push(if p.best_iou >= cfg.positive_iou {
            p.matched_gt.map(|i| scene.objects[i].class_id)
        } else if p.best_iou < cfg.match_iou {
            Some(BACKGROUND_CLASS)
        } else {
            None
        });
        boxes.push(match p.matched_gt {
            Some(i) => Some(encode_box(&scene.objects[i].bbox, &p.bbox)?.to_vec()),
            None => None,
        });
    }
    Ok(PreparedScene { scene, proposals, objects, centers, features, targets: DetectionTargets { classes, boxes } })
}

impl PreparedScene {
    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    /// Partner sampling for this scene under `seed`; `None` for an empty scene.
    pub fn pairs(&self, cfg: &RunConfig, seed: u64) -> Result<Option<PairSet>> {
        if self.is_empty() {
            return Ok(None);
        }
        build_pairs(self.len(), &self.centers, &cfg.pairing_config(seed)).map(Some)
    }

    /// Per-relation labels for every pair, in head order.
    pub fn relation_targets(&self, pairs: &PairSet, cfg: &RunConfig) -> Result<[Vec<bool>; 4]> {
        let labels = relation_labels_batch(&self.objects, pairs.pairs(), &cfg.thresholds())?;
        Ok(std::array::from_fn(|r| labels.iter().map(|l| l.as_array()[r]).collect()))
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<PreparedScene>,
    pub eval: Vec<PreparedScene>,
}

/// `n_scenes` generated rooms; the last `eval_count()` are held out.
pub fn build_dataset(cfg: &RunConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut scenes = Vec::with_capacity(cfg.n_scenes);
    for i in 0..cfg.n_scenes as u64 {
        let scene = generate_scene(derive_seed(cfg.seed, Stream::Scene, i), &cfg.generator())?;
        scenes.push(prepare_scene(scene, cfg, i)?);
    }
    let eval = scenes.split_off(cfg.n_scenes - cfg.eval_count());
    Ok(Dataset { train: scenes, eval })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig { n_scenes: 5, ..Default::default() }
    }

    #[test]
    fn split_and_targets() {
        let d = build_dataset(&small()).unwrap();
        assert_eq!((d.train.len(), d.eval.len()), (4, 1));
        for s in d.train.iter().chain(&d.eval) {
            assert_eq!(s.features.rows(), s.len());
            for (p, (c, b)) in s.proposals.iter().zip(s.targets.classes.iter().zip(&s.targets.boxes)) {
                if p.best_iou >= 0.5 {
                    assert!(matches!(c, Some(c) if *c < BACKGROUND_CLASS));
                }
                if p.best_iou < 0.25 {
                    assert_eq!(*c, Some(BACKGROUND_CLASS));
                    assert!(b.is_none());
                }
                assert_eq!(b.is_some(), p.matched_gt.is_some());
            }
        }
    }

    #[test]
    fn scenes_depend_on_the_root_seed() {
        let a = build_dataset(&small()).unwrap();
        let b = build_dataset(&RunConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.train[0].scene, b.train[0].scene);
        let again = build_dataset(&small()).unwrap();
        assert_eq!(a.train[0].features, again.train[0].features);
    }
}
