//! Inference and held-out evaluation.

use serde::{Deserialize, Serialize};

use super::dataset::{prepare_scene, PreparedScene};
use super::heads::decode_box;
use super::model::DetectorParams;
use super::scene::{Scene, BACKGROUND_CLASS, CLASS_NAMES};
use super::train::{pairing_seed, relation_eval, TrainOutcome, EVAL_PAIRING};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{ApReport, EvalDetection, GroundTruth, RelationMetrics};
use crate::geom3d::{nms3d, Aabb3, ScoredBox};
use crate::neural::{softmax, Checkpoint};

/// IoU thresholds reported by [`evaluate`].
pub const AP_THRESHOLDS: [f64; 2] = [0.25, 0.5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionResult {
    pub class_id: usize,
    pub bbox: Aabb3<f64>,
    pub confidence: f64,
}

/// A trained model with the configuration it was trained under.
#[derive(Debug, Clone)]
pub struct Detector {
    pub config: RunConfig,
    pub params: DetectorParams<f64>,
}

impl From<TrainOutcome> for Detector {
    fn from(t: TrainOutcome) -> Self {
        Self { config: t.config, params: t.params }
    }
}

impl Detector {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config = RunConfig::from_toml(&ck.config).map_err(|e| Error::Checkpoint(format!("embedded config: {e}")))?;
        let mut params = DetectorParams::zeros(&config.relation_dims(), config.aggregate, config.use_rm, config.detector_hidden);
        ck.load_into(&mut params)?;
        Ok(Self { config, params })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_params(self.config.to_toml(), &self.params)
    }

    /// Detections for a raw scene; `index` picks the proposal and pairing streams.
    pub fn infer(&self, scene: &Scene, index: usize) -> Result<Vec<DetectionResult>> {
        let prepared = prepare_scene(scene.clone(), &self.config, index as u64)?;
        self.infer_prepared(&prepared, index)
    }

    /// Forward, drop background, decode, class-aware NMS; sorted by confidence.
    pub fn infer_prepared(&self, scene: &PreparedScene, index: usize) -> Result<Vec<DetectionResult>> {
        if scene.is_empty() {
            return Ok(Vec::new());
        }
        let pairs = if self.params.uses_relations() { scene.pairs(&self.config, pairing_seed(&self.config, EVAL_PAIRING, index))? } else { None };
        let out = self.params.forward(&scene.features, pairs.as_ref())?;
        let mut candidates = Vec::new();
        for (r, p) in scene.proposals.iter().enumerate() {
            let probs = softmax(out.class_logits.row(r));
            let (class_id, &confidence) = probs
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |best, (c, p)| if *p > *best.1 { (c, p) } else { best });
            if !confidence.is_finite() {
                return Err(Error::Numeric(format!("proposal {r}: class probabilities are not finite")));
            }
            if class_id == BACKGROUND_CLASS {
                continue;
            }
            let bbox = decode_box(out.box_residuals.row(r), &p.bbox)?;
            candidates.push(ScoredBox { bbox, score: confidence, class_id });
        }
        let kept = nms3d(&candidates, self.config.nms_iou)?;
        Ok(kept.into_iter().map(|i| DetectionResult { class_id: candidates[i].class_id, bbox: candidates[i].bbox, confidence: candidates[i].score }).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub seed: u64,
    pub ap: ApReport,
    pub relations: Option<RelationMetrics>,
}

/// mAP at [`AP_THRESHOLDS`] and relation metrics over `scenes`, where scene
/// `i` uses stream index `i`.
pub fn evaluate(detector: &Detector, scenes: &[PreparedScene]) -> Result<EvalSummary> {
    let mut detections = Vec::new();
    let mut ground_truth = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        for d in detector.infer_prepared(s, i)? {
            detections.push(EvalDetection { scene: i, class_id: d.class_id, bbox: d.bbox, confidence: d.confidence });
        }
        ground_truth.extend(s.scene.objects.iter().map(|o| GroundTruth { scene: i, class_id: o.class_id, bbox: o.bbox }));
    }
    let ap = ApReport::evaluate(&detections, &ground_truth, &CLASS_NAMES, &AP_THRESHOLDS)?;
    let relations = relation_eval(&detector.params, scenes, &detector.config)?;
    Ok(EvalSummary { seed: detector.config.seed, ap, relations })
}
