//! Timing of spatial relation labeling: scalar per-pair loop vs batched kernel.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom3d::Aabb3;
use crate::pairing::{build_pairs, PairingConfig, PairingMode};
use crate::relations::{spatial_relations, spatial_relations_batch_into, BoxTable, RelationThresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelTag {
    Scalar,
    Batched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub implementation: KernelTag,
    pub pairs: usize,
    pub reps: usize,
    /// Median wall time of one full pass over all pairs.
    pub wall_time_s: f64,
    pub per_pair_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchComparison {
    pub seed: u64,
    pub n_objects: usize,
    pub k: usize,
    pub scalar: BenchReport,
    pub batched: BenchReport,
    /// Scalar time over batched time.
    pub speedup: f64,
}

/// Random boxes scattered through a 10 m x 10 m x 3 m volume.
pub fn random_boxes(n: usize, seed: u64) -> Vec<Aabb3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let size = [rng.random_range(0.05..1.5), rng.random_range(0.05..1.5), rng.random_range(0.05..1.2)];
            let lo = [
                rng.random_range(0.0..10.0 - size[0]),
                rng.random_range(0.0..10.0 - size[1]),
                rng.random_range(0.0..3.0 - size[2]),
            ];
            Aabb3::new(lo, [lo[0] + size[0], lo[1] + size[1], lo[2] + size[2]]).expect("valid random box")
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Labels `n_objects * k` random pairs with both paths, checks they agree, and
/// reports the median time of each over `reps` repetitions.
pub fn bench_relations(n_objects: usize, k: usize, reps: usize, seed: u64) -> Result<BenchComparison> {
    if n_objects < 2 {
        return Err(Error::invalid("benchmark needs at least two objects"));
    }
    if reps == 0 {
        return Err(Error::invalid("benchmark needs at least one repetition"));
    }
    let boxes = random_boxes(n_objects, seed);
    let centers: Vec<[f64; 3]> = boxes.iter().map(Aabb3::center).collect();
    let pair_set = build_pairs(n_objects, &centers, &PairingConfig { k, mode: PairingMode::Random, seed })?;
    let pairs = pair_set.pairs();
    let t = RelationThresholds::<f64>::default();

    // Both passes write into buffers kept across repetitions so the timings
    // measure the labeling work rather than page faults on fresh allocations.
    let mut scalar_out = Vec::with_capacity(pairs.len());
    let mut batched_out = Vec::with_capacity(pairs.len());
    let mut table = BoxTable::new(&boxes, &t)?;

    let scalar_pass = |out: &mut Vec<(bool, bool)>| {
        out.clear();
        out.extend(pairs.iter().map(|&(i, j)| spatial_relations(&boxes[i], &boxes[j], &t)));
    };
    fn batched_pass<'a>(
        table: &mut BoxTable<'a, f64>,
        boxes: &'a [Aabb3<f64>],
        pairs: &[(usize, usize)],
        t: &RelationThresholds<f64>,
        out: &mut Vec<(bool, bool)>,
    ) -> Result<()> {
        table.rebuild(boxes, t)?;
        spatial_relations_batch_into(table, pairs, out)
    }

    scalar_pass(&mut scalar_out);
    batched_pass(&mut table, &boxes, pairs, &t, &mut batched_out)?;
    if batched_out != scalar_out {
        return Err(Error::Numeric("batched relation kernel disagrees with the scalar reference".into()));
    }

    let mut scalar_times = Vec::with_capacity(reps);
    let mut batched_times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        scalar_pass(&mut scalar_out);
        black_box(&scalar_out);
        scalar_times.push(start.elapsed().as_secs_f64());

        let start = Instant::now();
        batched_pass(&mut table, &boxes, pairs, &t, &mut batched_out)?;
        black_box(&batched_out);
        batched_times.push(start.elapsed().as_secs_f64());
    }

    let n_pairs = pairs.len();
    let report = |implementation, times: &mut [f64]| {
        let wall = median(times).max(f64::MIN_POSITIVE);
        BenchReport { implementation, pairs: n_pairs, reps, wall_time_s: wall, per_pair_s: wall / n_pairs.max(1) as f64 }
    };
    let scalar = report(KernelTag::Scalar, &mut scalar_times);
    let batched = report(KernelTag::Batched, &mut batched_times);
    let speedup = scalar.wall_time_s / batched.wall_time_s;
    Ok(BenchComparison { seed, n_objects, k, scalar, batched, speedup })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_not_mean() {
        assert_eq!(median(&mut [3.0, 100.0, 1.0]), 3.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_bench_reports_both_paths() {
        let cmp = bench_relations(64, 8, 3, 1).unwrap();
        assert_eq!(cmp.scalar.pairs, 512);
        assert_eq!(cmp.batched.pairs, 512);
        assert_eq!(cmp.scalar.reps, 3);
        assert!(cmp.scalar.wall_time_s > 0.0 && cmp.batched.wall_time_s > 0.0);
        assert!(bench_relations(1, 8, 3, 1).is_err());
    }
}
