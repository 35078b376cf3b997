//! Run configuration: one flat TOML table, every key optional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{AdamConfig, Aggregate, RelationDims};
use crate::pairing::{PairingConfig, PairingMode};
use crate::pipeline::loss::{LossStyle, LossWeights};
use crate::pipeline::proposals::ProposalConfig;
use crate::pipeline::scene::GeneratorConfig;
use crate::relations::RelationThresholds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every other stream is derived from it.
    pub seed: u64,

    pub n_scenes: usize,
    pub holdout_fraction: f64,
    pub room_min: f64,
    pub room_max: f64,

    pub copies_per_object: usize,
    pub center_jitter: f64,
    pub size_jitter: f64,
    pub negatives_per_scene: usize,
    pub fragment_prob: f64,
    pub feature_noise: f64,

    pub tau_x: f64,
    pub tau_y: f64,
    pub tau_z: f64,
    pub tau_xy: f64,
    pub tau_xz: f64,
    pub tau_yz: f64,

    pub k: usize,
    pub pairing: PairingMode,
    pub aggregate: Aggregate,

    pub pair_layers: Vec<usize>,
    pub fusion_layers: Vec<usize>,
    pub head_hidden: usize,
    pub detector_hidden: usize,

    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,

    pub loss_style: LossStyle,
    /// Loss weights; unset entries take the defaults of `loss_style`.
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub lambda4: Option<f64>,

    pub use_rm: bool,
    pub predict_relations: bool,

    pub positive_iou: f64,
    pub match_iou: f64,
    pub nms_iou: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = RelationThresholds::<f64>::default();
        let dims = RelationDims::default();
        let adam = AdamConfig::default();
        let gen = GeneratorConfig::default();
        let prop = ProposalConfig::default();
        Self {
            seed: 0,
            n_scenes: 200,
            holdout_fraction: 0.2,
            room_min: gen.room_min,
            room_max: gen.room_max,
            copies_per_object: prop.copies,
            center_jitter: prop.center_jitter,
            size_jitter: prop.size_jitter,
            negatives_per_scene: prop.negatives,
            fragment_prob: prop.fragment_prob,
            feature_noise: 0.05,
            tau_x: t.tau_x,
            tau_y: t.tau_y,
            tau_z: t.tau_z,
            tau_xy: t.tau_xy,
            tau_xz: t.tau_xz,
            tau_yz: t.tau_yz,
            k: 8,
            pairing: PairingMode::Random,
            aggregate: Aggregate::Sum,
            pair_layers: dims.pair_layers,
            fusion_layers: dims.fusion_layers,
            head_hidden: dims.head_hidden,
            detector_hidden: 64,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_epsilon: adam.epsilon,
            epochs: 40,
            loss_style: LossStyle::Proposal,
            lambda1: None,
            lambda2: None,
            lambda3: None,
            lambda4: None,
            use_rm: true,
            predict_relations: true,
            positive_iou: 0.5,
            match_iou: 0.25,
            nms_iou: 0.5,
        }
    }
}

/// `(key, meaning)` for every config key, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "root seed for scenes, proposals, pairing and initialization"),
    ("n_scenes", "synthetic scenes generated for a run"),
    ("holdout_fraction", "fraction of scenes held out for evaluation"),
    ("room_min", "smallest room side in meters"),
    ("room_max", "largest room side in meters"),
    ("copies_per_object", "jittered proposals per ground-truth object"),
    ("center_jitter", "center noise, as a fraction of the box size"),
    ("size_jitter", "log-size noise"),
    ("negatives_per_scene", "background proposals per scene"),
    ("fragment_prob", "chance a large object also yields its two halves"),
    ("feature_noise", "noise on the class-signature channels"),
    ("tau_x", "axis distance threshold on x (m)"),
    ("tau_y", "axis distance threshold on y (m)"),
    ("tau_z", "axis distance threshold on z (m)"),
    ("tau_xy", "overlap ratio threshold on the xy plane"),
    ("tau_xz", "overlap ratio threshold on the xz plane"),
    ("tau_yz", "overlap ratio threshold on the yz plane"),
    ("k", "partners sampled per object"),
    ("pairing", "partner selection: random | nearest"),
    ("aggregate", "pair code pooling: sum | mean"),
    ("pair_layers", "pair encoder widths (4 layers)"),
    ("fusion_layers", "fusion MLP widths; last is the relation feature width"),
    ("head_hidden", "hidden width of each relation classifier"),
    ("detector_hidden", "hidden width of the class and box heads"),
    ("learning_rate", "Adam base learning rate"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("adam_epsilon", "Adam denominator offset"),
    ("epochs", "passes over the training scenes"),
    ("loss_style", "loss weight profile: proposal | voting"),
    ("lambda1", "classification weight (voting: objectness)"),
    ("lambda2", "box regression weight (voting: box)"),
    ("lambda3", "relation weight (voting: classification)"),
    ("lambda4", "voting only: relation weight"),
    ("use_rm", "feed relation features to the detection heads"),
    ("predict_relations", "supervise the relation classifiers"),
    ("positive_iou", "IoU for a proposal to count as a training positive"),
    ("match_iou", "IoU for a proposal to inherit a ground-truth identity"),
    ("nms_iou", "IoU at which NMS suppresses a same-class box"),
];

impl RunConfig {
    /// `(key, default, meaning)` rows for help output. Unset loss weights
    /// show the defaults of each style.
    pub fn key_help() -> Vec<(String, String, String)> {
        let table = toml::Table::try_from(RunConfig::default()).expect("config serializes to a table");
        let (p, v) = (LossWeights::defaults(LossStyle::Proposal), LossWeights::defaults(LossStyle::Voting));
        KEYS.iter()
            .map(|&(key, meaning)| {
                let default = match key {
                    "lambda1" => format!("{} (voting {})", p.lambda1, v.lambda1),
                    "lambda2" => format!("{} (voting {})", p.lambda2, v.lambda2),
                    "lambda3" => format!("{} (voting {})", p.lambda3, v.lambda3),
                    "lambda4" => format!("{} (voting {})", p.lambda4, v.lambda4),
                    _ => table[key].to_string(),
                };
                (key.to_string(), default, meaning.to_string())
            })
            .collect()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_scenes < 2 {
            return fail(format!("n_scenes must be at least 2, got {}", self.n_scenes));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return fail(format!("holdout_fraction must be in (0, 1), got {}", self.holdout_fraction));
        }
        let n_eval = self.eval_count();
        if n_eval == 0 || n_eval >= self.n_scenes {
            return fail(format!("holdout_fraction {} leaves no scenes on one side", self.holdout_fraction));
        }
        self.generator().validate()?;
        self.proposals().validate()?;
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return fail(format!("feature_noise must be non-negative, got {}", self.feature_noise));
        }
        self.thresholds().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        self.relation_dims().validate()?;
        if self.detector_hidden == 0 {
            return fail("detector_hidden must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("beta1 and beta2 must be in [0, 1)".into());
        }
        if !(self.adam_epsilon > 0.0) {
            return fail("adam_epsilon must be positive".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        self.loss_weights().validate()?;
        if self.predict_relations && !self.use_rm {
            return fail("predict_relations requires use_rm".into());
        }
        for (name, v) in [("positive_iou", self.positive_iou), ("match_iou", self.match_iou), ("nms_iou", self.nms_iou)] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("{name} must be in (0, 1], got {v}"));
            }
        }
        if self.match_iou > self.positive_iou {
            return fail("match_iou must not exceed positive_iou".into());
        }
        Ok(())
    }

    pub fn eval_count(&self) -> usize {
        (self.n_scenes as f64 * self.holdout_fraction).round() as usize
    }

    pub fn thresholds(&self) -> RelationThresholds<f64> {
        RelationThresholds {
            tau_x: self.tau_x,
            tau_y: self.tau_y,
            tau_z: self.tau_z,
            tau_xy: self.tau_xy,
            tau_xz: self.tau_xz,
            tau_yz: self.tau_yz,
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig { room_min: self.room_min, room_max: self.room_max }
    }

    pub fn proposals(&self) -> ProposalConfig {
        ProposalConfig {
            copies: self.copies_per_object,
            center_jitter: self.center_jitter,
            size_jitter: self.size_jitter,
            negatives: self.negatives_per_scene,
            fragment_prob: self.fragment_prob,
            match_iou: self.match_iou,
        }
    }

    pub fn relation_dims(&self) -> RelationDims {
        RelationDims {
            feature_dim: crate::pipeline::features::FEATURE_DIM,
            pair_layers: self.pair_layers.clone(),
            fusion_layers: self.fusion_layers.clone(),
            head_hidden: self.head_hidden,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.adam_epsilon }
    }

    pub fn pairing_config(&self, seed: u64) -> PairingConfig {
        PairingConfig { k: self.k, mode: self.pairing, seed }
    }

    pub fn loss_weights(&self) -> LossWeights {
        let d = LossWeights::defaults(self.loss_style);
        LossWeights {
            lambda1: self.lambda1.unwrap_or(d.lambda1),
            lambda2: self.lambda2.unwrap_or(d.lambda2),
            lambda3: self.lambda3.unwrap_or(d.lambda3),
            lambda4: self.lambda4.unwrap_or(d.lambda4),
        }
    }

    /// Sets one key from its TOML-literal text, as given on a command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).expect("config serializes to a table");
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        table.insert(key.to_string(), parsed);
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{key}: {}", e.message())))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }
}
