//! Multi-task detection loss.
//!
//! Proposal style: `λ1·L_cls + λ2·L_reg + λ3·L_rn`.
//! Voting style: `λ1·L_obj + λ2·L_reg + λ3·L_cls + λ4·L_rn`, where the
//! objectness logit is `logsumexp(foreground logits) - background logit`.

use serde::{Deserialize, Serialize};

use super::scene::BACKGROUND_CLASS;
use crate::error::{Error, Result};
use crate::neural::loss::log_sum_exp;
use crate::neural::{bce_loss, smooth_l1, softmax, softmax_cross_entropy, Tensor2};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossStyle {
    #[default]
    Proposal,
    Voting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl LossWeights {
    pub fn defaults(style: LossStyle) -> Self {
        match style {
            LossStyle::Proposal => Self { lambda1: 1.0, lambda2: 10.0, lambda3: 0.5, lambda4: 0.0 },
            LossStyle::Voting => Self { lambda1: 0.5, lambda2: 1.0, lambda3: 0.1, lambda4: 0.1 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3), ("lambda4", self.lambda4)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Per-term weights `(cls, reg, rn, obj)` under `style`.
    pub fn terms(&self, style: LossStyle) -> [f64; 4] {
        match style {
            LossStyle::Proposal => [self.lambda1, self.lambda2, self.lambda3, 0.0],
            LossStyle::Voting => [self.lambda3, self.lambda2, self.lambda4, self.lambda1],
        }
    }

    /// The same weights with relation supervision switched off.
    pub fn without_relations(mut self, style: LossStyle) -> Self {
        match style {
            LossStyle::Proposal => self.lambda3 = 0.0,
            LossStyle::Voting => self.lambda4 = 0.0,
        }
        self
    }
}

/// Per-proposal supervision. `None` entries are ignored by their term.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTargets<T> {
    /// Class in `0..=BACKGROUND_CLASS`.
    pub classes: Vec<Option<usize>>,
    /// Encoded box residuals for proposals that stand for an object.
    pub boxes: Vec<Option<Vec<T>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub cls: f64,
    pub reg: f64,
    pub rn: f64,
    pub obj: f64,
}

#[derive(Debug, Clone)]
pub struct LossGradients<T> {
    pub class_logits: Tensor2<T>,
    pub box_residuals: Tensor2<T>,
    pub relation_logits: [Vec<T>; 4],
}

/// Mean over the four heads of the per-head mean binary cross-entropy.
pub fn relation_loss<T: Real>(logits: &[Vec<T>; 4], targets: &[Vec<bool>; 4]) -> Result<(T, [Vec<T>; 4])> {
    let quarter = T::lit(0.25);
    let mut total = T::zero();
    let mut grads: [Vec<T>; 4] = Default::default();
    for r in 0..4 {
        let (l, mut g) = bce_loss(&logits[r], &targets[r])?;
        total += l * quarter;
        g.iter_mut().for_each(|v| *v *= quarter);
        grads[r] = g;
    }
    Ok((total, grads))
}

/// Objectness BCE on `logsumexp(fg) - bg` for rows with a class target.
pub fn objectness_loss<T: Real>(logits: &Tensor2<T>, classes: &[Option<usize>]) -> Result<(T, Tensor2<T>)> {
    if logits.rows() != classes.len() {
        return Err(Error::dims("objectness_loss targets", logits.rows(), classes.len()));
    }
    if logits.cols() != BACKGROUND_CLASS + 1 {
        return Err(Error::dims("objectness_loss logit width", BACKGROUND_CLASS + 1, logits.cols()));
    }
    let rows: Vec<usize> = (0..classes.len()).filter(|&r| classes[r].is_some()).collect();
    let z: Vec<T> = rows
        .iter()
        .map(|&r| {
            let row = logits.row(r);
            log_sum_exp(&row[..BACKGROUND_CLASS]) - row[BACKGROUND_CLASS]
        })
        .collect();
    let y: Vec<bool> = rows.iter().map(|&r| classes[r] != Some(BACKGROUND_CLASS)).collect();
    let (loss, dz) = bce_loss(&z, &y)?;
    let mut grad = Tensor2::zeros(logits.rows(), logits.cols());
    for (&r, &g) in rows.iter().zip(&dz) {
        let p = softmax(&logits.row(r)[..BACKGROUND_CLASS]);
        let dst = grad.row_mut(r);
        for (d, &pj) in dst[..BACKGROUND_CLASS].iter_mut().zip(&p) {
            *d = g * pj;
        }
        dst[BACKGROUND_CLASS] = -g;
    }
    Ok((loss, grad))
}

/// Weighted loss and its gradient on every network output. Relation terms
/// are skipped when `relation` is `None`.
pub fn total_loss<T: Real>(
    class_logits: &Tensor2<T>,
    box_residuals: &Tensor2<T>,
    targets: &DetectionTargets<T>,
    relation: Option<(&[Vec<T>; 4], &[Vec<bool>; 4])>,
    weights: &LossWeights,
    style: LossStyle,
) -> Result<(LossBreakdown, LossGradients<T>)> {
    weights.validate()?;
    let [w_cls, w_reg, w_rn, w_obj] = weights.terms(style).map(T::lit);

    let (cls, mut d_logits) = softmax_cross_entropy(class_logits, &targets.classes)?;
    let (reg, mut d_boxes) = smooth_l1(box_residuals, &targets.boxes)?;
    d_logits.data_mut().iter_mut().for_each(|v| *v *= w_cls);
    d_boxes.data_mut().iter_mut().for_each(|v| *v *= w_reg);

    let mut obj = T::zero();
    if style == LossStyle::Voting {
        let (l, g) = objectness_loss(class_logits, &targets.classes)?;
        obj = l;
        for (d, &v) in d_logits.data_mut().iter_mut().zip(g.data()) {
            *d += w_obj * v;
        }
    }

    let (rn, mut d_rel) = match relation {
        Some((logits, labels)) => relation_loss(logits, labels)?,
        None => (T::zero(), Default::default()),
    };
    d_rel.iter_mut().flatten().for_each(|v| *v *= w_rn);

    let total = w_cls * cls + w_reg * reg + w_rn * rn + w_obj * obj;
    if !total.is_finite() {
        return Err(Error::Numeric(format!("loss is not finite ({total})")));
    }
    let breakdown = LossBreakdown { total: total.as_f64(), cls: cls.as_f64(), reg: reg.as_f64(), rn: rn.as_f64(), obj: obj.as_f64() };
    Ok((breakdown, LossGradients { class_logits: d_logits, box_residuals: d_boxes, relation_logits: d_rel }))
}
