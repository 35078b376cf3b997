//! Training loop: one scene per Adam step, scenes reshuffled and partners
//! resampled every epoch.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{build_dataset, Dataset, PreparedScene};
use super::loss::{total_loss, LossBreakdown};
use super::model::DetectorParams;
use super::{derive_seed, Stream};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::RelationMetrics;
use crate::neural::{adam_step, AdamState, Checkpoint};
use crate::relations::Relation;

/// Pairing index used for held-out scenes, apart from every training epoch.
pub const EVAL_PAIRING: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub seed: u64,
    /// Loss terms averaged over the epoch's training scenes.
    pub loss: LossBreakdown,
    /// Held-out accuracy per relation; absent without a relation module.
    pub relation_accuracy: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: RunConfig,
    pub params: DetectorParams<f64>,
    pub log: Vec<EpochRecord>,
    /// Held-out relation metrics after the last epoch.
    pub relation_metrics: Option<RelationMetrics>,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_params(self.config.to_toml(), &self.params)
    }

    pub fn write_log<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.log {
            writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"))?;
        }
        Ok(())
    }
}

pub fn pairing_seed(cfg: &RunConfig, epoch: u64, scene: usize) -> u64 {
    derive_seed(derive_seed(cfg.seed, Stream::Pairing, epoch), Stream::Pairing, scene as u64)
}

/// Loss and parameter gradients for one scene.
pub fn scene_step(params: &DetectorParams<f64>, scene: &PreparedScene, cfg: &RunConfig, pair_seed: u64) -> Result<(LossBreakdown, DetectorParams<f64>)> {
    let pairs = if params.uses_relations() { scene.pairs(cfg, pair_seed)? } else { None };
    let out = params.forward(&scene.features, pairs.as_ref())?;
    let weights = if cfg.predict_relations { cfg.loss_weights() } else { cfg.loss_weights().without_relations(cfg.loss_style) };
    let rel_targets = match (&pairs, cfg.predict_relations) {
        (Some(p), true) => Some(scene.relation_targets(p, cfg)?),
        _ => None,
    };
    let relation = match (&out.relation_logits, &rel_targets) {
        (Some(l), Some(t)) => Some((l, t)),
        _ => None,
    };
    let (breakdown, g) = total_loss(&out.class_logits, &out.box_residuals, &scene.targets, relation, &weights, cfg.loss_style)?;
    let n_pairs = pairs.as_ref().map_or(0, |p| p.len());
    let d_rel = if relation.is_some() { g.relation_logits } else { std::array::from_fn(|_| vec![0.0; n_pairs]) };
    let grads = params.backward(&out.cache, &g.class_logits, &g.box_residuals, &d_rel)?;
    Ok((breakdown, grads))
}

/// Relation metrics of `params` on `scenes` with the held-out pairing.
pub fn relation_eval(params: &DetectorParams<f64>, scenes: &[PreparedScene], cfg: &RunConfig) -> Result<Option<RelationMetrics>> {
    if !params.uses_relations() {
        return Ok(None);
    }
    let mut m = RelationMetrics::default();
    for (i, s) in scenes.iter().enumerate() {
        let Some(pairs) = s.pairs(cfg, pairing_seed(cfg, EVAL_PAIRING, i))? else { continue };
        let out = params.forward(&s.features, Some(&pairs))?;
        let logits = out.relation_logits.expect("relation module present");
        m.update(&logits, &s.relation_targets(&pairs, cfg)?)?;
    }
    Ok(Some(m))
}

/// Trains on a freshly generated dataset.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let data = build_dataset(cfg)?;
    train_on(cfg, &data)
}

pub fn train_on(cfg: &RunConfig, data: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::Init, 0));
    let mut params = DetectorParams::init(&cfg.relation_dims(), cfg.aggregate, cfg.use_rm, cfg.detector_hidden, &mut init_rng);
    let mut adam = AdamState::new(cfg.adam(), &params);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut metrics = None;
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::Shuffle, epoch as u64)));
        let mut sum = LossBreakdown::default();
        for &i in &order {
            let scene = &data.train[i];
            if scene.is_empty() {
                continue;
            }
            let (b, grads) = scene_step(&params, scene, cfg, pairing_seed(cfg, epoch as u64, i))?;
            adam_step(&mut adam, &mut params, &grads)?;
            sum.total += b.total;
            sum.cls += b.cls;
            sum.reg += b.reg;
            sum.rn += b.rn;
            sum.obj += b.obj;
        }
        let n = order.len().max(1) as f64;
        let loss = LossBreakdown { total: sum.total / n, cls: sum.cls / n, reg: sum.reg / n, rn: sum.rn / n, obj: sum.obj / n };
        if !loss.total.is_finite() {
            return Err(Error::Numeric(format!("epoch {epoch}: mean loss is not finite")));
        }
        metrics = relation_eval(&params, &data.eval, cfg)?;
        let relation_accuracy = match &metrics {
            Some(m) => Relation::ALL.iter().map(|&r| (r.name().to_string(), m.accuracy(r))).collect(),
            None => BTreeMap::new(),
        };
        log.push(EpochRecord { epoch, seed: cfg.seed, loss, relation_accuracy });
    }
    Ok(TrainOutcome { config: cfg.clone(), params, log, relation_metrics: metrics })
}
