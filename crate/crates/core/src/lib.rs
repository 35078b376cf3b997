//! Pair-wise relation reasoning for 3D object detection.
//!
//! The crate is organized bottom-up:
//!
//! - [`geom3d`]: axis-aligned box measures, IoU and class-aware NMS.
//! - [`relations`]: support / hang-on / group / same-as labels for object pairs.
//! - [`pairing`]: choosing `k` partners per object (random or nearest).
//! - [`neural`]: dense layers, Adam, losses and the relation module itself.
//! - [`pipeline`]: synthetic rooms, proposals, features, detection heads, training.
//! - [`eval`]: detection mAP, relation metrics and the relation-kernel benchmark.
//!
//! Geometry and the neural substrate are generic over [`Real`] (`f32` or
//! `f64`); the pipeline runs in `f64`. The aliases below name the concrete
//! types most callers want.

pub mod config;
pub mod error;
pub mod eval;
pub mod geom3d;
pub mod neural;
pub mod pairing;
pub mod pipeline;
pub mod relations;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Aabb = geom3d::Aabb3<f64>;
pub type Aabb32 = geom3d::Aabb3<f32>;
pub type ScoredBox = geom3d::ScoredBox<f64>;
pub type Thresholds = relations::RelationThresholds<f64>;
pub type Object = relations::AnnotatedObject<f64>;
pub type Tensor = neural::Tensor2<f64>;
pub type Tensor32 = neural::Tensor2<f32>;
pub type Mlp = neural::MlpParams<f64>;
pub type Mlp32 = neural::MlpParams<f32>;
pub type RelationModule = neural::RelationModuleParams<f64>;
pub type RelationModule32 = neural::RelationModuleParams<f32>;
