//! Reference implementations and helpers shared by the integration tests.
//! Nothing here calls into the library's geometry or relation code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rel3d::geom3d::Aabb3;
use rel3d::neural::Parameters;
use rel3d::relations::RelationThresholds;

/// Gap between the facing sides of two intervals, as the smaller of the two
/// cross differences.
fn gap(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    let p = (a_hi - b_lo).abs();
    let q = (b_hi - a_lo).abs();
    if p < q {
        p
    } else {
        q
    }
}

fn overlap_len(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> f64 {
    let hi = if a_hi < b_hi { a_hi } else { b_hi };
    let lo = if a_lo > b_lo { a_lo } else { b_lo };
    if hi > lo {
        hi - lo
    } else {
        0.0
    }
}

/// Overlap ratio on the plane spanned by axes `u` and `v`.
fn plane_ratio(a: &[f64; 6], b: &[f64; 6], u: usize, v: usize) -> f64 {
    let inter = overlap_len(a[u], a[u + 3], b[u], b[u + 3]) * overlap_len(a[v], a[v + 3], b[v], b[v + 3]);
    let area = |c: &[f64; 6]| (c[u + 3] - c[u]) * (c[v + 3] - c[v]);
    let term = |ar: f64| if ar > 0.0 { inter / ar } else { 0.0 };
    let (ra, rb) = (term(area(a)), term(area(b)));
    if ra > rb {
        ra
    } else {
        rb
    }
}

/// `(support, hang_on)` computed straight from corner coordinates laid out
/// as `[x0, y0, z0, x1, y1, z1]`.
pub fn oracle_spatial(a: &[f64; 6], b: &[f64; 6], t: &RelationThresholds<f64>) -> (bool, bool) {
    let psi: Vec<f64> = (0..3).map(|k| gap(a[k], a[k + 3], b[k], b[k + 3])).collect();
    let o_xy = plane_ratio(a, b, 0, 1);
    let o_xz = plane_ratio(a, b, 0, 2);
    let o_yz = plane_ratio(a, b, 1, 2);
    let support = psi[2] <= t.tau_z && o_xy > t.tau_xy;
    let hang = !support && ((psi[1] <= t.tau_y && o_xz > t.tau_xz) || (psi[0] <= t.tau_x && o_yz > t.tau_yz));
    (support, hang)
}

pub fn corners(b: &Aabb3<f64>) -> [f64; 6] {
    let (lo, hi) = (b.min(), b.max());
    [lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]]
}

pub fn aabb(c: [f64; 6]) -> Aabb3<f64> {
    Aabb3::new([c[0], c[1], c[2]], [c[3], c[4], c[5]]).unwrap()
}

/// Boxes that often touch or stack: corners snapped to a 5 cm grid inside a
/// small volume, so the threshold boundaries are hit exactly.
pub fn snapped_boxes(n: usize, seed: u64) -> Vec<Aabb3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut c = [0.0; 6];
            for k in 0..3 {
                let lo = rng.random_range(0..40) as f64 * 0.05;
                let len = rng.random_range(1..20) as f64 * 0.05;
                c[k] = lo;
                c[k + 3] = lo + len;
            }
            aabb(c)
        })
        .collect()
}

/// Continuous random boxes in a 4 m cube.
pub fn loose_boxes(n: usize, seed: u64) -> Vec<Aabb3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut c = [0.0; 6];
            for k in 0..3 {
                let lo: f64 = rng.random_range(0.0..3.0);
                c[k] = lo;
                c[k + 3] = lo + rng.random_range(0.01..1.0);
            }
            aabb(c)
        })
        .collect()
}

pub fn random_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect()
}

/// Flattened parameters in enumeration order.
pub fn flat<P: Parameters<f64>>(p: &P) -> Vec<f64> {
    p.param_views().iter().flat_map(|v| v.data.iter().copied()).collect()
}

/// Central finite differences of `loss` with respect to every parameter of
/// `params`, in enumeration order.
pub fn numeric_gradient<P: Parameters<f64> + Clone>(params: &P, h: f64, loss: impl Fn(&P) -> f64) -> Vec<f64> {
    let sizes: Vec<usize> = params.param_views().iter().map(|v| v.data.len()).collect();
    let mut out = Vec::with_capacity(sizes.iter().sum());
    let mut work = params.clone();
    for (t, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = work.param_slices_mut()[t][i];
            work.param_slices_mut()[t][i] = orig + h;
            let up = loss(&work);
            work.param_slices_mut()[t][i] = orig - h;
            let down = loss(&work);
            work.param_slices_mut()[t][i] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

/// Biases start at zero, which can put a ReLU exactly on its kink (a dead
/// hidden row feeding a zero bias). Gradient checks move off it first.
pub fn jitter_biases<P: Parameters<f64>>(p: &mut P, seed: u64) {
    let is_bias: Vec<bool> = p.param_views().iter().map(|v| v.name.ends_with("bias")).collect();
    for (k, (slice, bias)) in p.param_slices_mut().into_iter().zip(is_bias).enumerate() {
        if bias {
            let noise = probe(slice.len(), seed.wrapping_mul(1000) + k as u64);
            slice.iter_mut().zip(noise).for_each(|(v, n)| *v += 0.1 * n);
        }
    }
}

/// Largest elementwise `|a - n| / max(|a|, |n|, floor)`; the floor keeps
/// vanishing gradients from dividing by zero.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor)).fold(0.0, f64::max)
}

/// Fixed random weights for turning a tensor into a scalar loss.
pub fn probe(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
