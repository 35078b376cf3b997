//! Ground-truth relation labels for object pairs.
//!
//! Spatial labels (support, hang-on) are closed-form predicates over axis
//! distances and plane projection overlaps; semantic labels (group,
//! same-as) compare annotations. [`relation_labels`] is the per-pair
//! reference and [`relation_labels_batch`] the batched kernel
//! that must agree with it bit for bit.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom3d::{axis_distance, plane_overlap, Aabb3, Axis, Plane};
use crate::scalar::Real;

/// Class/instance id carried by proposals that match no ground-truth object.
/// Never compares equal for the semantic relations.
pub const BACKGROUND: usize = usize::MAX;

/// Distance thresholds (meters) and projection-overlap thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationThresholds<T> {
    pub tau_x: T,
    pub tau_y: T,
    pub tau_z: T,
    pub tau_xy: T,
    pub tau_xz: T,
    pub tau_yz: T,
}

impl<T: Real> Default for RelationThresholds<T> {
    fn default() -> Self {
        let d = T::lit(0.1);
        let r = T::lit(0.5);
        Self { tau_x: d, tau_y: d, tau_z: d, tau_xy: r, tau_xz: r, tau_yz: r }
    }
}

impl<T: Real> RelationThresholds<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau_x", self.tau_x), ("tau_y", self.tau_y), ("tau_z", self.tau_z)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("tau_xy", self.tau_xy), ("tau_xz", self.tau_xz), ("tau_yz", self.tau_yz)] {
            if !(v > T::zero() && v < T::one()) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// The four relation types, in head order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Group,
    SameAs,
    Support,
    HangOn,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::Group, Relation::SameAs, Relation::Support, Relation::HangOn];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Group => "group",
            Relation::SameAs => "same_as",
            Relation::Support => "support",
            Relation::HangOn => "hang_on",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RelationLabels {
    pub group: bool,
    pub same_as: bool,
    pub support: bool,
    pub hang_on: bool,
}

impl RelationLabels {
    pub fn get(&self, r: Relation) -> bool {
        match r {
            Relation::Group => self.group,
            Relation::SameAs => self.same_as,
            Relation::Support => self.support,
            Relation::HangOn => self.hang_on,
        }
    }

    pub fn as_array(&self) -> [bool; 4] {
        [self.group, self.same_as, self.support, self.hang_on]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotatedObject<T> {
    pub bbox: Aabb3<T>,
    pub class_id: usize,
    pub instance_id: usize,
}

/// Support and hang-on for one pair. Support is tested first; hang-on only
/// when support fails, so at most one is true.
pub fn spatial_relations<T: Real>(a: &Aabb3<T>, b: &Aabb3<T>, t: &RelationThresholds<T>) -> (bool, bool) {
    let psi_x = axis_distance(a, b, Axis::X);
    let psi_y = axis_distance(a, b, Axis::Y);
    let psi_z = axis_distance(a, b, Axis::Z);
    let omega_xy = plane_overlap(a, b, Plane::XY).ratio;
    let omega_xz = plane_overlap(a, b, Plane::XZ).ratio;
    let omega_yz = plane_overlap(a, b, Plane::YZ).ratio;

    if psi_z <= t.tau_z && omega_xy > t.tau_xy {
        (true, false)
    } else if (psi_y <= t.tau_y && omega_xz > t.tau_xz) || (psi_x <= t.tau_x && omega_yz > t.tau_yz) {
        (false, true)
    } else {
        (false, false)
    }
}

/// `(group, same_as)`: equal class ids, equal instance ids. Background never matches.
pub fn semantic_relations<T>(a: &AnnotatedObject<T>, b: &AnnotatedObject<T>) -> (bool, bool) {
    let group = a.class_id == b.class_id && a.class_id != BACKGROUND;
    let same_as = a.instance_id == b.instance_id && a.instance_id != BACKGROUND;
    (group, same_as)
}

pub fn relation_labels<T: Real>(
    a: &AnnotatedObject<T>,
    b: &AnnotatedObject<T>,
    t: &RelationThresholds<T>,
) -> RelationLabels {
    let (group, same_as) = semantic_relations(a, b);
    let (support, hang_on) = spatial_relations(&a.bbox, &b.bbox, t);
    RelationLabels { group, same_as, support, hang_on }
}

/// Boxes prepared for [`spatial_relations_batch`] under fixed thresholds:
/// the corners plus a per-box slab signature used to discard pairs that
/// cannot be related.
#[derive(Debug, Clone)]
pub struct BoxTable<'a, T: Clone> {
    boxes: Cow<'a, [Aabb3<T>]>,
    signatures: Vec<u64>,
    thresholds: RelationThresholds<T>,
}

impl<'a, T: Real> BoxTable<'a, T> {
    /// Table over borrowed boxes.
    pub fn new(boxes: &'a [Aabb3<T>], t: &RelationThresholds<T>) -> Result<Self> {
        Self::build(Cow::Borrowed(boxes), t)
    }

    /// Table that owns its boxes.
    pub fn from_boxes(boxes: Vec<Aabb3<T>>, t: &RelationThresholds<T>) -> Result<Self> {
        Self::build(Cow::Owned(boxes), t)
    }

    fn build(boxes: Cow<'a, [Aabb3<T>]>, t: &RelationThresholds<T>) -> Result<Self> {
        t.validate()?;
        let mut table = Self { boxes, signatures: Vec::new(), thresholds: *t };
        table.compute_signatures();
        Ok(table)
    }

    /// Points the table at new boxes, keeping the signature allocation.
    pub fn rebuild(&mut self, boxes: &'a [Aabb3<T>], t: &RelationThresholds<T>) -> Result<()> {
        t.validate()?;
        self.thresholds = *t;
        self.boxes = Cow::Borrowed(boxes);
        self.compute_signatures();
        Ok(())
    }

    pub fn thresholds(&self) -> &RelationThresholds<T> {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Bit `s` of field `a` is set when the box, grown by a little more than
    /// `τ_a` on both sides, reaches slab `s` of axis `a`.
    ///
    /// A pair can only pass a plane test when it is within τ along the normal
    /// and overlaps along the two in-plane axes, so the grown boxes meet on
    /// every axis and the two signatures share a bit in every field. The
    /// margin covers rounding in Ψ and in the slab arithmetic, and every step
    /// from coordinate to slab is monotone, so no such pair is lost.
    fn compute_signatures(&mut self) {
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx2") {
                // SAFETY: guarded by the runtime feature check.
                unsafe { self.compute_signatures_avx2() };
                return;
            }
        }
        self.compute_signatures_body();
    }

    /// Same code compiled with AVX2 enabled, which vectorizes the slab math.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn compute_signatures_avx2(&mut self) {
        self.compute_signatures_body();
    }

    #[inline(always)]
    fn compute_signatures_body(&mut self) {
        self.signatures.clear();
        let t = &self.thresholds;
        let tau = [t.tau_x, t.tau_y, t.tau_z];
        // Four interleaved accumulators break the min/max dependency chain.
        let mut lo = [[T::infinity(); 3]; 4];
        let mut hi = [[T::neg_infinity(); 3]; 4];
        let widen = |lo: &mut [T; 3], hi: &mut [T; 3], b: &Aabb3<T>| {
            let (b_lo, b_hi) = (b.min(), b.max());
            for a in 0..3 {
                lo[a] = if b_lo[a] < lo[a] { b_lo[a] } else { lo[a] };
                hi[a] = if b_hi[a] > hi[a] { b_hi[a] } else { hi[a] };
            }
        };
        let chunks = self.boxes.chunks_exact(4);
        for b in chunks.remainder() {
            widen(&mut lo[0], &mut hi[0], b);
        }
        for chunk in chunks {
            for (k, b) in chunk.iter().enumerate() {
                widen(&mut lo[k], &mut hi[k], b);
            }
        }
        let (lo, hi) = {
            let (mut l, mut h) = (lo[0], hi[0]);
            for k in 1..4 {
                for a in 0..3 {
                    l[a] = l[a].min(lo[k][a]);
                    h[a] = h[a].max(hi[k][a]);
                }
            }
            (l, h)
        };
        let scale = (0..3).fold(T::zero(), |m, a| m.max(lo[a].abs()).max(hi[a].abs()));
        let margin = T::lit(16.0) * T::epsilon() * scale;
        let slabs = T::from_usize(SLABS).expect("slab count fits scalar");
        let top = slabs - T::one();
        let mut grid = [(T::zero(), T::zero(), T::zero()); 3];
        for a in 0..3 {
            let reach = tau[a] + margin;
            let origin = lo[a] - reach;
            let inv = slabs / (hi[a] + reach - origin);
            if !(origin.is_finite() && inv.is_finite() && inv > T::zero()) {
                // Degenerate or overflowing extent: keep every pair.
                self.signatures.resize(self.boxes.len(), FIELDS);
                return;
            }
            grid[a] = (reach, origin, inv);
        }
        self.signatures.resize(self.boxes.len(), 0);
        // Rounds to the nearest slab via the 2^52 trick; any monotone
        // rounding works here.
        let slab = |x: T, origin: T, inv: T| {
            let v = (x - origin) * inv;
            let v = if v > top { top } else { v };
            let v = if v > T::zero() { v } else { T::zero() };
            (v.as_f64() + 4_503_599_627_370_496.0).to_bits() & 31
        };
        for (sig, b) in self.signatures.iter_mut().zip(self.boxes.iter()) {
            let (b_lo, b_hi) = (b.min(), b.max());
            let mut s = 0;
            for (a, &(reach, origin, inv)) in grid.iter().enumerate() {
                let (first, last) = (slab(b_lo[a] - reach, origin, inv), slab(b_hi[a] + reach, origin, inv));
                s |= ((2u64 << last) - (1u64 << first)) << (STRIDE * a);
            }
            *sig = s;
        }
    }
}

// Three 20-bit fields, each followed by a zero spacer bit. Adding
// `2^20 - 1` to a field carries into its spacer iff the field is nonzero,
// so one add and one mask test all three fields without branches.
const SLABS: usize = 20;
const STRIDE: usize = SLABS + 1;
const FIELD: u64 = (1 << SLABS) - 1;
const FIELDS: u64 = FIELD | (FIELD << STRIDE) | (FIELD << (2 * STRIDE));
const SPACERS: u64 = (1 << SLABS) | (1 << (SLABS + STRIDE)) | (1 << (SLABS + 2 * STRIDE));
/// Spatial labels for many pairs at once. Output `i` is
/// `spatial_relations(boxes[pairs[i].0], boxes[pairs[i].1], table.thresholds())`.
///
/// Pairs whose slab signatures are disjoint on some axis are labeled
/// unrelated without touching coordinates; the rest are screened on Ψ and
/// overlap signs before the full test.
pub fn spatial_relations_batch<T: Real>(table: &BoxTable<'_, T>, pairs: &[(usize, usize)]) -> Result<Vec<(bool, bool)>> {
    let mut out = Vec::new();
    spatial_relations_batch_into(table, pairs, &mut out)?;
    Ok(out)
}

/// As [`spatial_relations_batch`], writing into a reusable buffer. On error
/// the buffer contents are unspecified.
pub fn spatial_relations_batch_into<T: Real>(
    table: &BoxTable<'_, T>,
    pairs: &[(usize, usize)],
    out: &mut Vec<(bool, bool)>,
) -> Result<()> {
    let t = &table.thresholds;
    let n = table.len();
    out.clear();
    out.resize(pairs.len(), (false, false));
    let (sigs, boxes) = (&table.signatures[..], &table.boxes[..]);
    for (slot, &(i, j)) in out.iter_mut().zip(pairs) {
        let (Some(&sa), Some(&sb)) = (sigs.get(i), sigs.get(j)) else {
            return Err(Error::invalid(format!("pair ({i}, {j}) out of range for {n} objects")));
        };
        if ((sa & sb) + FIELDS) & SPACERS == SPACERS {
            *slot = screened(&boxes[i], &boxes[j], t);
        }
    }
    Ok(())
}

#[inline]
fn screened<T: Real>(a: &Aabb3<T>, b: &Aabb3<T>, t: &RelationThresholds<T>) -> (bool, bool) {
    let tau = [t.tau_x, t.tau_y, t.tau_z];
    let (a_lo, a_hi, b_lo, b_hi) = (a.min(), a.max(), b.min(), b.max());
    let mut near = [false; 3];
    let mut overlap = [false; 3];
    for ax in 0..3 {
        near[ax] = (a_hi[ax] - b_lo[ax]).abs().min((b_hi[ax] - a_lo[ax]).abs()) <= tau[ax];
        overlap[ax] = a_hi[ax].min(b_hi[ax]) > a_lo[ax].max(b_lo[ax]);
    }
    // Without positive overlap on both in-plane axes Ω is zero, and Ω > τ
    // fails for any positive τ.
    let possible = (near[2] && overlap[0] && overlap[1])
        || (near[1] && overlap[0] && overlap[2])
        || (near[0] && overlap[1] && overlap[2]);
    if possible {
        spatial_relations(a, b, t)
    } else {
        (false, false)
    }
}

/// Batched counterpart of [`relation_labels`] over index pairs into `objects`.
pub fn relation_labels_batch<T: Real>(
    objects: &[AnnotatedObject<T>],
    pairs: &[(usize, usize)],
    t: &RelationThresholds<T>,
) -> Result<Vec<RelationLabels>> {
    let table = BoxTable::from_boxes(objects.iter().map(|o| o.bbox).collect(), t)?;
    let spatial = spatial_relations_batch(&table, pairs)?;
    Ok(pairs
        .iter()
        .zip(spatial)
        .map(|(&(i, j), (support, hang_on))| {
            let (group, same_as) = semantic_relations(&objects[i], &objects[j]);
            RelationLabels { group, same_as, support, hang_on }
        })
        .collect())
}
