//! Baseline / RM− / RM(random) / RM(nearest) sweep over shared seeds.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::dataset::build_dataset;
use super::infer::{evaluate, Detector, EvalSummary};
use super::train::train_on;
use crate::config::RunConfig;
use crate::error::Result;
use crate::pairing::PairingMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    RmMinus,
    RmRandom,
    RmNearest,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::RmMinus, Variant::RmRandom, Variant::RmNearest];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::RmMinus => "rm-",
            Variant::RmRandom => "rm_random",
            Variant::RmNearest => "rm_nearest",
        }
    }

    /// `base` with this variant's flags.
    pub fn apply(self, base: &RunConfig) -> RunConfig {
        let mut c = base.clone();
        match self {
            Variant::Baseline => {
                c.use_rm = false;
                c.predict_relations = false;
            }
            Variant::RmMinus => {
                c.use_rm = true;
                c.predict_relations = false;
                c.pairing = PairingMode::Random;
            }
            Variant::RmRandom => {
                c.use_rm = true;
                c.predict_relations = true;
                c.pairing = PairingMode::Random;
            }
            Variant::RmNearest => {
                c.use_rm = true;
                c.predict_relations = true;
                c.pairing = PairingMode::Nearest;
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    /// One held-out evaluation per seed, in seed order.
    pub runs: Vec<EvalSummary>,
}

impl AblationRow {
    fn mean_map(&self, t: usize) -> f64 {
        self.runs.iter().map(|r| r.ap.map[t]).sum::<f64>() / self.runs.len().max(1) as f64
    }

    pub fn mean_map25(&self) -> f64 {
        self.mean_map(0)
    }

    pub fn mean_map50(&self) -> f64 {
        self.mean_map(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, v: Variant) -> &AblationRow {
        self.rows.iter().find(|r| r.variant == v).expect("every variant has a row")
    }

    /// `variant,map@0.25,map@0.5` with seed-mean values.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,map@0.25,map@0.5\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.4},{:.4}", r.variant.label(), r.mean_map25(), r.mean_map50());
        }
        s
    }

    /// Aligned text table with one mAP@0.5 column per seed.
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<12} {:>9} {:>9}", "variant", "map@0.25", "map@0.5");
        for seed in &self.seeds {
            let _ = write!(s, " {:>9}", format!("s{seed}@0.5"));
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{:<12} {:>9.4} {:>9.4}", r.variant.label(), r.mean_map25(), r.mean_map50());
            for run in &r.runs {
                let _ = write!(s, " {:>9.4}", run.ap.map[1]);
            }
            s.push('\n');
        }
        s
    }
}

/// Trains and evaluates every variant for each seed. All variants of one
/// seed share its scenes and proposals.
pub fn run_ablation(base: &RunConfig, seeds: &[u64]) -> Result<AblationTable> {
    let mut rows: Vec<AblationRow> = Variant::ALL.iter().map(|&variant| AblationRow { variant, runs: Vec::new() }).collect();
    for &seed in seeds {
        let seeded = RunConfig { seed, ..base.clone() };
        let data = build_dataset(&seeded)?;
        for row in &mut rows {
            let cfg = row.variant.apply(&seeded);
            let detector = Detector::from(train_on(&cfg, &data)?);
            row.runs.push(evaluate(&detector, &data.eval)?);
        }
    }
    Ok(AblationTable { seeds: seeds.to_vec(), rows })
}
