//! The relation module.
//!
//! For every sampled pair `(i, j)` the pair encoder sees the concatenated
//! features `[o_i | o_j]` and produces a hidden code `h_ij`. Codes are
//! aggregated per anchor (sum or mean) and passed through the fusion MLP to
//! give the relation feature `r_i`; the same codes feed one binary
//! classifier per relation type.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpCache, MlpParams};
use super::params::{prefixed, ParamView, Parameters};
use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::pairing::PairSet;
use crate::relations::Relation;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Sum,
    Mean,
}

impl std::str::FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregate::Sum),
            "mean" => Ok(Aggregate::Mean),
            other => Err(Error::invalid(format!("unknown aggregate {other:?}"))),
        }
    }
}

/// Layer widths of the relation module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDims {
    /// Object feature width `D`.
    pub feature_dim: usize,
    /// Output widths of the pair encoder layers; its input is `2 * feature_dim`.
    pub pair_layers: Vec<usize>,
    /// Output widths of the fusion layers; the last is the relation feature width.
    pub fusion_layers: Vec<usize>,
    /// Hidden width of each relation classifier (output is one logit).
    pub head_hidden: usize,
}

impl Default for RelationDims {
    fn default() -> Self {
        Self { feature_dim: 32, pair_layers: vec![64; 4], fusion_layers: vec![32, 32], head_hidden: 32 }
    }
}

impl RelationDims {
    pub fn pair_dims(&self) -> Vec<usize> {
        std::iter::once(2 * self.feature_dim).chain(self.pair_layers.iter().copied()).collect()
    }

    pub fn pair_hidden(&self) -> usize {
        *self.pair_layers.last().expect("pair encoder has layers")
    }

    pub fn fusion_dims(&self) -> Vec<usize> {
        std::iter::once(self.pair_hidden()).chain(self.fusion_layers.iter().copied()).collect()
    }

    pub fn relation_dim(&self) -> usize {
        *self.fusion_layers.last().expect("fusion MLP has layers")
    }

    pub fn head_dims(&self) -> Vec<usize> {
        vec![self.pair_hidden(), self.head_hidden, 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.pair_layers.is_empty() || self.fusion_layers.is_empty() || self.head_hidden == 0 {
            return Err(Error::Config("relation module dimensions must be non-empty and positive".into()));
        }
        if self.pair_layers.iter().chain(&self.fusion_layers).any(|&d| d == 0) {
            return Err(Error::Config("relation module layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Learnable tensors of the relation module. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationModuleParams<T> {
    pub pair_encoder: MlpParams<T>,
    pub fusion: MlpParams<T>,
    /// One classifier per relation, indexed by [`Relation::index`].
    pub heads: [MlpParams<T>; 4],
    pub aggregate: Aggregate,
}

impl<T: Real> RelationModuleParams<T> {
    pub fn init<R: Rng + ?Sized>(dims: &RelationDims, aggregate: Aggregate, rng: &mut R) -> Self {
        let pair_encoder = MlpParams::init(&dims.pair_dims(), rng);
        let fusion = MlpParams::init(&dims.fusion_dims(), rng);
        let heads = std::array::from_fn(|_| MlpParams::init(&dims.head_dims(), rng));
        Self { pair_encoder, fusion, heads, aggregate }
    }

    pub fn zeros(dims: &RelationDims, aggregate: Aggregate) -> Self {
        Self {
            pair_encoder: MlpParams::zeros(&dims.pair_dims()),
            fusion: MlpParams::zeros(&dims.fusion_dims()),
            heads: std::array::from_fn(|_| MlpParams::zeros(&dims.head_dims())),
            aggregate,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            pair_encoder: self.pair_encoder.zeros_like(),
            fusion: self.fusion.zeros_like(),
            heads: std::array::from_fn(|i| self.heads[i].zeros_like()),
            aggregate: self.aggregate,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.pair_encoder.input_dim() / 2
    }

    pub fn relation_dim(&self) -> usize {
        self.fusion.output_dim()
    }

    pub fn head(&self, r: Relation) -> &MlpParams<T> {
        &self.heads[r.index()]
    }

    /// Checks the layer chain: encoder input is `2 D`, heads and fusion read
    /// the encoder output.
    pub fn validate(&self) -> Result<()> {
        let enc_in = self.pair_encoder.input_dim();
        if !enc_in.is_multiple_of(2) {
            return Err(Error::dims("pair encoder input (must be 2 x feature dim)", "even width", enc_in));
        }
        let hidden = self.pair_encoder.output_dim();
        if self.fusion.input_dim() != hidden {
            return Err(Error::dims("fusion input", hidden, self.fusion.input_dim()));
        }
        for h in &self.heads {
            if h.input_dim() != hidden || h.output_dim() != 1 {
                return Err(Error::dims("relation head", format!("{hidden} -> 1"), format!("{} -> {}", h.input_dim(), h.output_dim())));
            }
        }
        Ok(())
    }
}

impl<T: Real> Parameters<T> for RelationModuleParams<T> {
    fn param_views(&self) -> Vec<ParamView<'_, T>> {
        let mut v: Vec<_> = prefixed("pair_encoder", self.pair_encoder.param_views()).collect();
        v.extend(prefixed("fusion", self.fusion.param_views()));
        for r in Relation::ALL {
            v.extend(prefixed(&format!("head_{}", r.name()), self.heads[r.index()].param_views()));
        }
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.pair_encoder.param_slices_mut();
        v.extend(self.fusion.param_slices_mut());
        for h in &mut self.heads {
            v.extend(h.param_slices_mut());
        }
        v
    }
}

/// Everything the reverse pass needs from a forward call.
#[derive(Debug, Clone)]
pub struct RelationCache<T> {
    n_objects: usize,
    feature_dim: usize,
    pairs: Vec<(usize, usize)>,
    counts: Vec<usize>,
    pair_cache: MlpCache<T>,
    fusion_cache: MlpCache<T>,
    head_caches: Vec<MlpCache<T>>,
    signature: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RelationOutput<T> {
    /// `n_objects x relation_dim`; rows of anchors without partners are zero.
    pub relation_features: Tensor2<T>,
    /// One logit per pair for each relation, indexed by [`Relation::index`].
    pub pair_logits: [Vec<T>; 4],
    pub cache: RelationCache<T>,
}

fn signature<T: Real>(p: &RelationModuleParams<T>) -> Vec<usize> {
    let mut s = p.pair_encoder.dims();
    s.extend(p.fusion.dims());
    for h in &p.heads {
        s.extend(h.dims());
    }
    s.push(p.aggregate as usize);
    s
}

pub fn relation_forward<T: Real>(
    p: &RelationModuleParams<T>,
    features: &Tensor2<T>,
    pairs: &PairSet,
) -> Result<RelationOutput<T>> {
    p.validate()?;
    let d = p.feature_dim();
    if features.cols() != d {
        return Err(Error::dims("relation_forward feature width", d, features.cols()));
    }
    let n = features.rows();
    if pairs.n_objects() != n {
        return Err(Error::dims("relation_forward pair set size", n, pairs.n_objects()));
    }

    let list = pairs.pairs().to_vec();
    let mut pair_input = Tensor2::zeros(list.len(), 2 * d);
    let mut counts = vec![0usize; n];
    for (row, &(i, j)) in list.iter().enumerate() {
        let dst = pair_input.row_mut(row);
        dst[..d].copy_from_slice(features.row(i));
        dst[d..].copy_from_slice(features.row(j));
        counts[i] += 1;
    }

    let (codes, pair_cache) = p.pair_encoder.forward(&pair_input)?;
    let hidden = codes.cols();

    let mut pooled = Tensor2::zeros(n, hidden);
    for (row, &(i, _)) in list.iter().enumerate() {
        for (acc, &h) in pooled.row_mut(i).iter_mut().zip(codes.row(row)) {
            *acc += h;
        }
    }
    if p.aggregate == Aggregate::Mean {
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                let inv = T::one() / T::from_usize(c).expect("count fits scalar");
                pooled.row_mut(i).iter_mut().for_each(|v| *v *= inv);
            }
        }
    }

    let (mut relation_features, fusion_cache) = p.fusion.forward(&pooled)?;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            relation_features.row_mut(i).iter_mut().for_each(|v| *v = T::zero());
        }
    }

    let mut head_caches = Vec::with_capacity(4);
    let mut pair_logits: [Vec<T>; 4] = Default::default();
    for r in Relation::ALL {
        let (logits, cache) = p.heads[r.index()].forward(&codes)?;
        pair_logits[r.index()] = logits.into_vec();
        head_caches.push(cache);
    }

    Ok(RelationOutput {
        relation_features,
        pair_logits,
        cache: RelationCache {
            n_objects: n,
            feature_dim: d,
            pairs: list,
            counts,
            pair_cache,
            fusion_cache,
            head_caches,
            signature: signature(p),
        },
    })
}

/// Reverse pass for [`relation_forward`].
///
/// `d_relation` is the upstream gradient on the relation features and
/// `d_logits` on each relation's pair logits. Returns parameter gradients and
/// the gradient with respect to the input object features.
pub fn relation_backward<T: Real>(
    p: &RelationModuleParams<T>,
    cache: &RelationCache<T>,
    d_relation: &Tensor2<T>,
    d_logits: &[Vec<T>; 4],
) -> Result<(RelationModuleParams<T>, Tensor2<T>)> {
    if cache.signature != signature(p) {
        return Err(Error::invalid("relation cache was produced by differently shaped parameters"));
    }
    let n = cache.n_objects;
    let n_pairs = cache.pairs.len();
    if d_relation.shape() != [n, p.relation_dim()] {
        return Err(Error::dims(
            "relation_backward relation gradient",
            format!("{n}x{}", p.relation_dim()),
            format!("{}x{}", d_relation.rows(), d_relation.cols()),
        ));
    }
    if let Some(bad) = d_logits.iter().find(|g| g.len() != n_pairs) {
        return Err(Error::dims("relation_backward logit gradient", n_pairs, bad.len()));
    }

    let mut d_rel = d_relation.clone();
    for (i, &c) in cache.counts.iter().enumerate() {
        if c == 0 {
            d_rel.row_mut(i).iter_mut().for_each(|v| *v = T::zero());
        }
    }
    let (fusion_grads, d_pooled) = p.fusion.backward(&cache.fusion_cache, &d_rel)?;

    let hidden = p.pair_encoder.output_dim();
    let mut d_codes = Tensor2::zeros(n_pairs, hidden);
    for (row, &(i, _)) in cache.pairs.iter().enumerate() {
        let scale = match p.aggregate {
            Aggregate::Sum => T::one(),
            Aggregate::Mean => T::one() / T::from_usize(cache.counts[i]).expect("count fits scalar"),
        };
        for (g, &u) in d_codes.row_mut(row).iter_mut().zip(d_pooled.row(i)) {
            *g = u * scale;
        }
    }

    let mut head_grads: [Option<MlpParams<T>>; 4] = Default::default();
    for r in Relation::ALL {
        let k = r.index();
        let upstream = Tensor2::from_vec(n_pairs, 1, d_logits[k].clone())?;
        let (g, d_in) = p.heads[k].backward(&cache.head_caches[k], &upstream)?;
        for (acc, &v) in d_codes.data_mut().iter_mut().zip(d_in.data()) {
            *acc += v;
        }
        head_grads[k] = Some(g);
    }

    let (pair_grads, d_pair_input) = p.pair_encoder.backward(&cache.pair_cache, &d_codes)?;
    let d = cache.feature_dim;
    let mut d_features = Tensor2::zeros(n, d);
    for (row, &(i, j)) in cache.pairs.iter().enumerate() {
        let src = d_pair_input.row(row);
        for (acc, &v) in d_features.row_mut(i).iter_mut().zip(&src[..d]) {
            *acc += v;
        }
        for (acc, &v) in d_features.row_mut(j).iter_mut().zip(&src[d..]) {
            *acc += v;
        }
    }

    let heads = head_grads.map(|g| g.expect("every head visited"));
    Ok((RelationModuleParams { pair_encoder: pair_grads, fusion: fusion_grads, heads, aggregate: p.aggregate }, d_features))
}
