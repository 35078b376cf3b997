//! Detection average precision.
//!
//! Detections of one class are visited in descending confidence (ties by
//! ascending index). Each is matched to the unmatched ground-truth box of
//! the same class and scene with the highest IoU (ties by index) and counts
//! as a true positive when that IoU reaches the threshold. AP is the area
//! under the monotonized precision-recall curve, evaluated at every recall
//! step.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom3d::{iou3d, Aabb3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalDetection {
    pub scene: usize,
    pub class_id: usize,
    pub bbox: Aabb3<f64>,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub scene: usize,
    pub class_id: usize,
    pub bbox: Aabb3<f64>,
}

/// AP of `class_id`, or `None` when the class has no ground truth.
pub fn average_precision(detections: &[EvalDetection], ground_truth: &[GroundTruth], class_id: usize, iou_threshold: f64) -> Result<Option<f64>> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::invalid(format!("IoU threshold must lie in (0, 1], got {iou_threshold}")));
    }
    if let Some(d) = detections.iter().find(|d| !d.confidence.is_finite()) {
        return Err(Error::invalid(format!("detection confidence {} is not finite", d.confidence)));
    }
    let gts: Vec<&GroundTruth> = ground_truth.iter().filter(|g| g.class_id == class_id).collect();
    if gts.is_empty() {
        return Ok(None);
    }
    let mut order: Vec<&EvalDetection> = detections.iter().filter(|d| d.class_id == class_id).collect();
    // Stable sort keeps ascending index among equal confidences.
    order.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));

    let mut matched = vec![false; gts.len()];
    let mut hits = Vec::with_capacity(order.len());
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if matched[g] || gt.scene != d.scene {
                continue;
            }
            let iou = iou3d(&d.bbox, &gt.bbox);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        let hit = match best {
            Some((g, iou)) if iou >= iou_threshold => {
                matched[g] = true;
                true
            }
            _ => false,
        };
        hits.push(hit);
    }
    Ok(Some(ap_from_hits(&hits, gts.len())))
}

/// All-point AP from the hit sequence of confidence-ordered detections.
fn ap_from_hits(hits: &[bool], n_gt: usize) -> f64 {
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (i, &h) in hits.iter().enumerate() {
        tp += h as usize;
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev) * p;
        prev = *r;
    }
    ap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_id: usize,
    pub name: String,
    pub n_gt: usize,
    pub n_detections: usize,
    /// One entry per threshold; `None` when the class has no ground truth.
    pub ap: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub thresholds: Vec<f64>,
    pub classes: Vec<ClassAp>,
    /// Mean over classes with ground truth, one per threshold.
    pub map: Vec<f64>,
    pub n_gt: usize,
    pub n_detections: usize,
}

impl ApReport {
    pub fn evaluate(detections: &[EvalDetection], ground_truth: &[GroundTruth], class_names: &[&str], thresholds: &[f64]) -> Result<Self> {
        let mut classes = Vec::with_capacity(class_names.len());
        for (class_id, name) in class_names.iter().enumerate() {
            let ap = thresholds.iter().map(|&t| average_precision(detections, ground_truth, class_id, t)).collect::<Result<Vec<_>>>()?;
            classes.push(ClassAp {
                class_id,
                name: name.to_string(),
                n_gt: ground_truth.iter().filter(|g| g.class_id == class_id).count(),
                n_detections: detections.iter().filter(|d| d.class_id == class_id).count(),
                ap,
            });
        }
        let map = (0..thresholds.len())
            .map(|t| {
                let aps: Vec<f64> = classes.iter().filter_map(|c| c.ap[t]).collect();
                if aps.is_empty() { 0.0 } else { aps.iter().sum::<f64>() / aps.len() as f64 }
            })
            .collect();
        Ok(Self { thresholds: thresholds.to_vec(), classes, map, n_gt: ground_truth.len(), n_detections: detections.len() })
    }

    pub fn map_at(&self, threshold: f64) -> Option<f64> {
        self.thresholds.iter().position(|&t| t == threshold).map(|i| self.map[i])
    }

    /// One row per class plus a final `mAP` row; AP columns per threshold.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,n_gt,n_detections");
        for t in &self.thresholds {
            let _ = write!(s, ",ap@{t}");
        }
        s.push('\n');
        for c in &self.classes {
            let _ = write!(s, "{},{},{}", c.name, c.n_gt, c.n_detections);
            for ap in &c.ap {
                match ap {
                    Some(v) => {
                        let _ = write!(s, ",{v:.4}");
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        let _ = write!(s, "mAP,{},{}", self.n_gt, self.n_detections);
        for m in &self.map {
            let _ = write!(s, ",{m:.4}");
        }
        s.push('\n');
        s
    }
}
