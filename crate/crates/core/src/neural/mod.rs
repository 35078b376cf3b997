//! Dense neural-network substrate and the relation module.

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod mlp;
pub mod params;
pub mod relation;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, NamedTensor};
pub use loss::{bce_loss, sigmoid, smooth_l1, softmax, softmax_cross_entropy};
pub use mlp::{Dense, MlpCache, MlpParams};
pub use params::{ParamView, Parameters};
pub use relation::{relation_backward, relation_forward, Aggregate, RelationCache, RelationDims, RelationModuleParams, RelationOutput};
pub use tensor::Tensor2;
