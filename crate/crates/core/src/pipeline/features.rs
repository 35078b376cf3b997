//! Handcrafted per-proposal descriptor.
//!
//! | channels | content |
//! |---|---|
//! | 0..3   | side lengths / 2 m |
//! | 3..6   | log side ratios xy, xz, yz, halved and clamped to ±5 |
//! | 6..9   | center, bottom and top height / 1.5 m |
//! | 9      | log volume / 4 |
//! | 10..14 | gaps to the x-low, x-high, y-low, y-high room boundary / 3 m |
//! | 14     | smallest of those gaps / 1 m |
//! | 15..32 | class signature plus noise |
//!
//! The signature is a fixed code per class of the matched ground-truth
//! object, with stools and side-tables sharing one code and unmatched
//! proposals getting a background code. Only channels 10..15 depend on where
//! the box sits in the room.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::proposals::Proposal;
use super::scene::{Scene, NUM_CLASSES, SIDE_TABLE, STOOL};
use crate::error::{Error, Result};
use crate::geom3d::Aabb3;
use crate::neural::Tensor2;

pub const FEATURE_DIM: usize = 32;
pub const SIGNATURE_START: usize = 15;
pub const SIGNATURE_DIM: usize = FEATURE_DIM - SIGNATURE_START;
pub const POSITION_CHANNELS: std::ops::Range<usize> = 10..15;

const SIGNATURE_SEED: u64 = 0x5167_0a7e;
const CLAMP: f64 = 5.0;

/// Signature group of a class: stools and side-tables share one, and
/// `NUM_CLASSES` stands for background.
fn signature_group(class_id: Option<usize>) -> usize {
    match class_id {
        Some(SIDE_TABLE) => STOOL,
        Some(c) => c,
        None => NUM_CLASSES,
    }
}

fn signature_codes() -> Vec<[f64; SIGNATURE_DIM]> {
    let mut rng = ChaCha8Rng::seed_from_u64(SIGNATURE_SEED);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    (0..=NUM_CLASSES).map(|_| std::array::from_fn(|_| unit.sample(&mut rng))).collect()
}

/// Geometric channels `0..SIGNATURE_START` of one box in `room`.
pub fn geometric_features(b: &Aabb3<f64>, room: &Aabb3<f64>) -> [f64; SIGNATURE_START] {
    let s = b.size().map(|v| v.max(1e-6));
    let (lo, hi, c) = (b.min(), b.max(), b.center());
    let (rlo, rhi) = (room.min(), room.max());
    let gaps = [lo[0] - rlo[0], rhi[0] - hi[0], lo[1] - rlo[1], rhi[1] - hi[1]];
    let nearest = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let f = [
        s[0] / 2.0,
        s[1] / 2.0,
        s[2] / 2.0,
        (s[0] / s[1]).ln() / 2.0,
        (s[0] / s[2]).ln() / 2.0,
        (s[1] / s[2]).ln() / 2.0,
        c[2] / 1.5,
        lo[2] / 1.5,
        hi[2] / 1.5,
        (s[0] * s[1] * s[2]).ln() / 4.0,
        gaps[0] / 3.0,
        gaps[1] / 3.0,
        gaps[2] / 3.0,
        gaps[3] / 3.0,
        nearest,
    ];
    f.map(|v| v.clamp(-CLAMP, CLAMP))
}

/// `proposals.len() x FEATURE_DIM` descriptor matrix. `noise` is the standard
/// deviation added to the signature channels from a generator seeded by `seed`.
pub fn extract_features(scene: &Scene, proposals: &[Proposal], noise: f64, seed: u64) -> Result<Tensor2<f64>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!("feature noise must be non-negative, got {noise}")));
    }
    let codes = signature_codes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Tensor2::zeros(proposals.len(), FEATURE_DIM);
    for (r, p) in proposals.iter().enumerate() {
        let row = out.row_mut(r);
        row[..SIGNATURE_START].copy_from_slice(&geometric_features(&p.bbox, &scene.room));
        let code = &codes[signature_group(p.matched_gt.map(|i| scene.objects[i].class_id))];
        for (dst, &v) in row[SIGNATURE_START..].iter_mut().zip(code) {
            *dst = (v + noise * unit.sample(&mut rng)).clamp(-CLAMP, CLAMP);
        }
    }
    Ok(out)
}
