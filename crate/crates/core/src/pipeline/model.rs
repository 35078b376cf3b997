//! Detector: optional relation module feeding the detection heads.

use rand::Rng;

use super::heads::{DetectionHeads, HeadsCache};
use crate::error::{Error, Result};
use crate::neural::params::prefixed;
use crate::neural::{relation_backward, relation_forward, Aggregate, ParamView, Parameters, RelationCache, RelationDims, RelationModuleParams, Tensor2};
use crate::pairing::PairSet;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams<T> {
    /// Absent for the baseline; the heads then see the object features alone.
    pub relation: Option<RelationModuleParams<T>>,
    pub heads: DetectionHeads<T>,
}

#[derive(Debug, Clone)]
pub struct DetectorOutput<T> {
    pub class_logits: Tensor2<T>,
    pub box_residuals: Tensor2<T>,
    pub relation_logits: Option<[Vec<T>; 4]>,
    pub cache: DetectorCache<T>,
}

#[derive(Debug, Clone)]
pub struct DetectorCache<T> {
    relation: Option<RelationCache<T>>,
    heads: HeadsCache<T>,
    feature_dim: usize,
}

impl<T: Real> DetectorParams<T> {
    pub fn init<R: Rng + ?Sized>(dims: &RelationDims, aggregate: Aggregate, use_rm: bool, detector_hidden: usize, rng: &mut R) -> Self {
        let relation = use_rm.then(|| RelationModuleParams::init(dims, aggregate, rng));
        let input = dims.feature_dim + if use_rm { dims.relation_dim() } else { 0 };
        Self { relation, heads: DetectionHeads::init(input, detector_hidden, rng) }
    }

    pub fn zeros(dims: &RelationDims, aggregate: Aggregate, use_rm: bool, detector_hidden: usize) -> Self {
        let relation = use_rm.then(|| RelationModuleParams::zeros(dims, aggregate));
        let input = dims.feature_dim + if use_rm { dims.relation_dim() } else { 0 };
        Self { relation, heads: DetectionHeads::zeros(input, detector_hidden) }
    }

    pub fn zeros_like(&self) -> Self {
        Self { relation: self.relation.as_ref().map(|r| r.zeros_like()), heads: self.heads.zeros_like() }
    }

    pub fn uses_relations(&self) -> bool {
        self.relation.is_some()
    }

    /// Forward pass. `pairs` is required exactly when the relation module is present.
    pub fn forward(&self, features: &Tensor2<T>, pairs: Option<&PairSet>) -> Result<DetectorOutput<T>> {
        let feature_dim = features.cols();
        let (input, relation, relation_logits) = match (&self.relation, pairs) {
            (Some(p), Some(pairs)) => {
                let out = relation_forward(p, features, pairs)?;
                (features.hcat(&out.relation_features)?, Some(out.cache), Some(out.pair_logits))
            }
            (Some(_), None) => return Err(Error::invalid("the relation module needs a pair set")),
            (None, _) => (features.clone(), None, None),
        };
        if input.cols() != self.heads.input_dim() {
            return Err(Error::dims("detection head input width", self.heads.input_dim(), input.cols()));
        }
        let (class_logits, box_residuals, heads) = self.heads.forward(&input)?;
        Ok(DetectorOutput { class_logits, box_residuals, relation_logits, cache: DetectorCache { relation, heads, feature_dim } })
    }

    /// Parameter gradients from the upstream gradients on every output.
    pub fn backward(&self, cache: &DetectorCache<T>, d_logits: &Tensor2<T>, d_boxes: &Tensor2<T>, d_relation_logits: &[Vec<T>; 4]) -> Result<Self> {
        let (heads, d_input) = self.heads.backward(&cache.heads, d_logits, d_boxes)?;
        let relation = match (&self.relation, &cache.relation) {
            (Some(p), Some(rc)) => {
                let d_rel = d_input.columns(cache.feature_dim, d_input.cols());
                let (g, _) = relation_backward(p, rc, &d_rel, d_relation_logits)?;
                Some(g)
            }
            (None, None) => None,
            _ => return Err(Error::invalid("detector cache does not match the parameters")),
        };
        Ok(Self { relation, heads })
    }
}

impl<T: Real> Parameters<T> for DetectorParams<T> {
    fn param_views(&self) -> Vec<ParamView<'_, T>> {
        let mut v = Vec::new();
        if let Some(r) = &self.relation {
            v.extend(prefixed("relation", r.param_views()));
        }
        v.extend(prefixed("heads", self.heads.param_views()));
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = Vec::new();
        if let Some(r) = &mut self.relation {
            v.extend(r.param_slices_mut());
        }
        v.extend(self.heads.param_slices_mut());
        v
    }
}
