//! Toy detection pipeline: synthetic rooms, proposals, features, the
//! detector, training, inference and the ablation sweep.

pub mod ablation;
pub mod dataset;
pub mod features;
pub mod heads;
pub mod infer;
pub mod loss;
pub mod model;
pub mod proposals;
pub mod scene;
pub mod train;

pub use ablation::{run_ablation, AblationRow, AblationTable, Variant};
pub use dataset::{build_dataset, prepare_scene, Dataset, PreparedScene};
pub use infer::{evaluate, DetectionResult, Detector, EvalSummary};
pub use loss::{total_loss, DetectionTargets, LossBreakdown, LossStyle, LossWeights};
pub use model::DetectorParams;
pub use scene::{generate_scene, GeneratorConfig, Scene};
pub use train::{train, EpochRecord, TrainOutcome};

/// Independent seed streams derived from one root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scene = 1,
    Proposals = 2,
    Features = 3,
    Pairing = 4,
    Init = 5,
    Shuffle = 6,
}

/// Seed for item `index` of `stream` under `root`, via the splitmix64 finalizer.
pub fn derive_seed(root: u64, stream: Stream, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(root) ^ stream as u64) ^ index)
}
