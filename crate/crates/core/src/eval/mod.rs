//! Detection mAP, relation metrics and the relation-kernel benchmark.

pub mod ap;
pub mod bench;
pub mod relation_metrics;

pub use ap::{average_precision, ApReport, ClassAp, EvalDetection, GroundTruth};
pub use bench::{bench_relations, BenchComparison, BenchReport, KernelTag};
pub use relation_metrics::{relation_metrics, Confusion, RelationMetrics, RelationScore};
