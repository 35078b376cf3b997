//! Axis-aligned 3D box geometry.
//!
//! Everything here is a pure function of immutable boxes. The relation
//! predicates build on [`axis_distance`] and [`plane_overlap`]; detection
//! matching and suppression build on [`iou3d`] and [`nms3d`].

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Coordinate plane a box is projected onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plane {
    XY,
    XZ,
    YZ,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::XY, Plane::XZ, Plane::YZ];

    /// The two in-plane axes.
    #[inline]
    pub fn axes(self) -> (Axis, Axis) {
        match self {
            Plane::XY => (Axis::X, Axis::Y),
            Plane::XZ => (Axis::X, Axis::Z),
            Plane::YZ => (Axis::Y, Axis::Z),
        }
    }
}

/// Axis-aligned box with `min[a] <= max[a]` on every axis and finite corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb3<T> {
    min: [T; 3],
    max: [T; 3],
}

impl<T: Real> Aabb3<T> {
    pub fn new(min: [T; 3], max: [T; 3]) -> Result<Self> {
        for a in 0..3 {
            if !min[a].is_finite() || !max[a].is_finite() {
                return Err(Error::invalid("box corners must be finite"));
            }
            if min[a] > max[a] {
                return Err(Error::invalid(format!(
                    "box min exceeds max on axis {a}: {} > {}",
                    min[a], max[a]
                )));
            }
        }
        Ok(Self { min, max })
    }

    /// Box from its center and full side lengths. Sizes must be non-negative.
    pub fn from_center_size(center: [T; 3], size: [T; 3]) -> Result<Self> {
        let half = T::lit(0.5);
        let mut min = [T::zero(); 3];
        let mut max = [T::zero(); 3];
        for a in 0..3 {
            if size[a] < T::zero() {
                return Err(Error::invalid("box size must be non-negative"));
            }
            min[a] = center[a] - size[a] * half;
            max[a] = center[a] + size[a] * half;
        }
        Self::new(min, max)
    }

    #[inline]
    pub fn min(&self) -> [T; 3] {
        self.min
    }

    #[inline]
    pub fn max(&self) -> [T; 3] {
        self.max
    }

    #[inline]
    pub fn lo(&self, axis: Axis) -> T {
        self.min[axis.index()]
    }

    #[inline]
    pub fn hi(&self, axis: Axis) -> T {
        self.max[axis.index()]
    }

    #[inline]
    pub fn extent(&self, axis: Axis) -> T {
        self.hi(axis) - self.lo(axis)
    }

    pub fn size(&self) -> [T; 3] {
        [self.extent(Axis::X), self.extent(Axis::Y), self.extent(Axis::Z)]
    }

    pub fn center(&self) -> [T; 3] {
        let half = T::lit(0.5);
        [
            (self.min[0] + self.max[0]) * half,
            (self.min[1] + self.max[1]) * half,
            (self.min[2] + self.max[2]) * half,
        ]
    }

    pub fn volume(&self) -> T {
        self.extent(Axis::X) * self.extent(Axis::Y) * self.extent(Axis::Z)
    }

    /// Area of the box's projection onto `plane`.
    #[inline]
    pub fn projected_area(&self, plane: Plane) -> T {
        let (u, v) = plane.axes();
        self.extent(u) * self.extent(v)
    }

    pub fn translated(&self, offset: [T; 3]) -> Result<Self> {
        let mut min = self.min;
        let mut max = self.max;
        for a in 0..3 {
            min[a] += offset[a];
            max[a] += offset[a];
        }
        Self::new(min, max)
    }

    /// True when `other` lies inside `self` (boundaries inclusive).
    pub fn contains(&self, other: &Self) -> bool {
        (0..3).all(|a| self.min[a] <= other.min[a] && other.max[a] <= self.max[a])
    }

    /// Length of the overlap of the two boxes' intervals on `axis`, or zero.
    #[inline]
    pub fn overlap_len(&self, other: &Self, axis: Axis) -> T {
        let lo = self.lo(axis).max(other.lo(axis));
        let hi = self.hi(axis).min(other.hi(axis));
        (hi - lo).max(T::zero())
    }

    /// Splits the box in half along its longest axis (ties: x before y before z).
    pub fn split_longest(&self) -> (Self, Self) {
        let mut axis = Axis::X;
        for a in [Axis::Y, Axis::Z] {
            if self.extent(a) > self.extent(axis) {
                axis = a;
            }
        }
        let i = axis.index();
        let mid = (self.min[i] + self.max[i]) * T::lit(0.5);
        let mut first = *self;
        let mut second = *self;
        first.max[i] = mid;
        second.min[i] = mid;
        (first, second)
    }
}

/// Minimum face-to-face gap between two boxes along `axis`:
/// `min(|max(a) - min(b)|, |max(b) - min(a)|)`.
///
/// For a box paired with itself this is its own extent on that axis.
#[inline]
pub fn axis_distance<T: Real>(a: &Aabb3<T>, b: &Aabb3<T>, axis: Axis) -> T {
    let ab = (a.hi(axis) - b.lo(axis)).abs();
    let ba = (b.hi(axis) - a.lo(axis)).abs();
    ab.min(ba)
}

/// Projection overlap ratio on one coordinate plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneOverlap<T> {
    pub plane: Plane,
    pub ratio: T,
}

/// Larger of the two intersection-over-own-area ratios of the boxes'
/// projections onto `plane`. A zero-area projection contributes a zero term.
pub fn plane_overlap<T: Real>(a: &Aabb3<T>, b: &Aabb3<T>, plane: Plane) -> PlaneOverlap<T> {
    let (u, v) = plane.axes();
    let inter = a.overlap_len(b, u) * a.overlap_len(b, v);
    let ratio = overlap_term(inter, a.projected_area(plane))
        .max(overlap_term(inter, b.projected_area(plane)));
    PlaneOverlap { plane, ratio }
}

#[inline]
pub(crate) fn overlap_term<T: Real>(inter: T, area: T) -> T {
    if area > T::zero() {
        inter / area
    } else {
        T::zero()
    }
}

pub fn intersection_volume<T: Real>(a: &Aabb3<T>, b: &Aabb3<T>) -> T {
    a.overlap_len(b, Axis::X) * a.overlap_len(b, Axis::Y) * a.overlap_len(b, Axis::Z)
}

/// Intersection volume over union volume; zero when the union is empty.
pub fn iou3d<T: Real>(a: &Aabb3<T>, b: &Aabb3<T>) -> T {
    let inter = intersection_volume(a, b);
    let union = a.volume() + b.volume() - inter;
    if union > T::zero() {
        inter / union
    } else {
        T::zero()
    }
}

/// Euclidean distance between box centers.
pub fn center_distance<T: Real>(a: &Aabb3<T>, b: &Aabb3<T>) -> T {
    point_distance(a.center(), b.center())
}

pub(crate) fn point_distance<T: Real>(p: [T; 3], q: [T; 3]) -> T {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// A box with a detection score and class, the unit of suppression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox<T> {
    pub bbox: Aabb3<T>,
    pub score: T,
    pub class_id: usize,
}

/// Class-aware greedy non-maximum suppression.
///
/// Boxes are visited by descending score (ties by ascending index); a box is
/// kept iff its IoU with every kept box of the same class is below
/// `iou_threshold`. Returns kept indices in visiting order.
pub fn nms3d<T: Real>(boxes: &[ScoredBox<T>], iou_threshold: T) -> Result<Vec<usize>> {
    if !(iou_threshold > T::zero() && iou_threshold <= T::one()) {
        return Err(Error::invalid(format!(
            "nms iou threshold must lie in (0, 1], got {iou_threshold}"
        )));
    }
    if let Some(bad) = boxes.iter().position(|b| !b.score.is_finite()) {
        return Err(Error::invalid(format!("box {bad} has a non-finite score")));
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[j]
            .score
            .partial_cmp(&boxes[i].score)
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let candidate = &boxes[i];
        let suppressed = kept.iter().any(|&k| {
            boxes[k].class_id == candidate.class_id
                && iou3d(&boxes[k].bbox, &candidate.bbox) >= iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(min: [f64; 3], max: [f64; 3]) -> Aabb3<f64> {
        Aabb3::new(min, max).unwrap()
    }

    #[test]
    fn rejects_inverted_and_non_finite_boxes() {
        assert!(Aabb3::new([0.0, 0.0, 1.0], [1.0, 1.0, 0.5]).is_err());
        assert!(Aabb3::new([0.0, f64::NAN, 0.0], [1.0, 1.0, 1.0]).is_err());
        assert!(Aabb3::new([0.0; 3], [f64::INFINITY, 1.0, 1.0]).is_err());
    }

    #[test]
    fn axis_distance_examples() {
        let a = bx([0.0, 0.0, 0.0], [1.0, 1.0, 0.75]);
        let b = bx([0.0, 0.0, 0.78], [1.0, 1.0, 1.0]);
        // min(|0.75 - 0.78|, |1.0 - 0.0|)
        let expected = (0.75f64 - 0.78).abs();
        assert_eq!(axis_distance(&a, &b, Axis::Z), expected);
        assert!((axis_distance(&a, &b, Axis::Z) - 0.03).abs() < 1e-12);

        let c = bx([0.0; 3], [1.0; 3]);
        assert_eq!(axis_distance(&c, &c, Axis::Z), 1.0);

        let d = bx([0.0, 0.0, 0.0], [0.1, 1.0, 1.0]);
        let e = bx([0.1, 0.0, 0.0], [0.15, 1.0, 1.0]);
        assert_eq!(axis_distance(&d, &e, Axis::X), 0.0);
    }

    #[test]
    fn plane_overlap_examples() {
        let a = bx([0.0, 0.0, 0.0], [2.0, 1.0, 1.0]);
        let b = bx([0.5, 0.0, 3.0], [1.5, 1.0, 4.0]);
        assert_eq!(plane_overlap(&a, &b, Plane::XY).ratio, 1.0);

        let inner = bx([0.2, 0.3, 0.0], [0.4, 0.6, 0.2]);
        assert_eq!(plane_overlap(&a, &inner, Plane::XY).ratio, 1.0);

        let far = bx([5.0, 5.0, 0.0], [6.0, 6.0, 1.0]);
        assert_eq!(plane_overlap(&a, &far, Plane::XY).ratio, 0.0);
    }

    #[test]
    fn plane_overlap_partial_uses_smaller_footprint() {
        // delta = 0.5 * 1, beta(a) = 2, beta(b) = 1 -> max(0.25, 0.5)
        let a = bx([0.0, 0.0, 0.0], [2.0, 1.0, 1.0]);
        let b = bx([1.5, 0.0, 0.0], [2.5, 1.0, 1.0]);
        assert_eq!(plane_overlap(&a, &b, Plane::XY).ratio, 0.5);
    }

    #[test]
    fn degenerate_footprints_contribute_zero() {
        let flat = bx([0.0, 0.0, 0.0], [0.0, 1.0, 1.0]);
        let solid = bx([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        // flat has zero xy area; solid's term is 0 / 1.
        assert_eq!(plane_overlap(&flat, &solid, Plane::XY).ratio, 0.0);
        assert_eq!(plane_overlap(&flat, &flat, Plane::XY).ratio, 0.0);
        // The yz projection of flat is non-degenerate.
        assert_eq!(plane_overlap(&flat, &solid, Plane::YZ).ratio, 1.0);
    }

    #[test]
    fn iou_examples() {
        let a = bx([0.0; 3], [1.0; 3]);
        let b = bx([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]);
        assert!((iou3d(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou3d(&a, &a), 1.0);
        let c = bx([3.0; 3], [4.0; 3]);
        assert_eq!(iou3d(&a, &c), 0.0);
        let point = bx([0.0; 3], [0.0; 3]);
        assert_eq!(iou3d(&point, &point), 0.0);
    }

    #[test]
    fn center_distance_examples() {
        let a = bx([-1.0; 3], [1.0; 3]);
        assert_eq!(center_distance(&a, &a), 0.0);
        let b = bx([2.0, 3.0, -1.0], [4.0, 5.0, 1.0]);
        assert_eq!(center_distance(&a, &b), 5.0);
    }

    #[test]
    fn split_longest_halves_the_box() {
        let a = bx([0.0, 0.0, 0.0], [1.0, 3.0, 2.0]);
        let (p, q) = a.split_longest();
        assert_eq!(p.max()[1], 1.5);
        assert_eq!(q.min()[1], 1.5);
        assert_eq!(p.volume() + q.volume(), a.volume());
    }

    fn scored(min: [f64; 3], max: [f64; 3], score: f64, class_id: usize) -> ScoredBox<f64> {
        ScoredBox { bbox: bx(min, max), score, class_id }
    }

    #[test]
    fn nms_examples() {
        // Offset 0.25 along x on unit cubes: inter 0.75, union 1.25 -> IoU 0.6.
        let boxes = vec![
            scored([0.0; 3], [1.0; 3], 0.9, 0),
            scored([0.25, 0.0, 0.0], [1.25, 1.0, 1.0], 0.8, 0),
        ];
        assert!((iou3d(&boxes[0].bbox, &boxes[1].bbox) - 0.6).abs() < 1e-12);
        assert_eq!(nms3d(&boxes, 0.5).unwrap(), vec![0]);

        let mixed = vec![
            scored([0.0; 3], [1.0; 3], 0.9, 0),
            scored([0.0; 3], [1.0; 3], 0.8, 1),
        ];
        assert_eq!(nms3d(&mixed, 0.5).unwrap(), vec![0, 1]);

        assert_eq!(nms3d(&boxes[..1], 0.5).unwrap(), vec![0]);
        assert!(nms3d::<f64>(&[], 0.5).unwrap().is_empty());
    }

    #[test]
    fn nms_tie_breaks_by_index() {
        let boxes = vec![
            scored([0.0; 3], [1.0; 3], 0.5, 0),
            scored([0.0; 3], [1.0; 3], 0.5, 0),
        ];
        assert_eq!(nms3d(&boxes, 0.5).unwrap(), vec![0]);
    }

    #[test]
    fn nms_rejects_bad_threshold() {
        assert!(nms3d::<f64>(&[], 0.0).is_err());
        assert!(nms3d::<f64>(&[], 1.5).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let a = Aabb3::<f32>::new([0.0; 3], [1.0; 3]).unwrap();
        let b = Aabb3::<f32>::new([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]).unwrap();
        assert!((iou3d(&a, &b) - 1.0 / 3.0).abs() < 1e-6);
    }

    fn arb_box() -> impl Strategy<Value = Aabb3<f64>> {
        (
            prop::array::uniform3(-5.0f64..5.0),
            prop::array::uniform3(0.0f64..3.0),
        )
            .prop_map(|(lo, ext)| {
                bx(lo, [lo[0] + ext[0], lo[1] + ext[1], lo[2] + ext[2]])
            })
    }

    /// Literal replay of the greedy rule: repeatedly take the best remaining
    /// box and drop everything of its class that overlaps it.
    fn nms_reference(boxes: &[ScoredBox<f64>], thr: f64) -> Vec<usize> {
        let mut alive: Vec<usize> = (0..boxes.len()).collect();
        let mut kept = Vec::new();
        while !alive.is_empty() {
            let mut best = 0;
            for pos in 1..alive.len() {
                let (i, b) = (alive[pos], alive[best]);
                if boxes[i].score > boxes[b].score || (boxes[i].score == boxes[b].score && i < b) {
                    best = pos;
                }
            }
            let top = alive.remove(best);
            kept.push(top);
            alive.retain(|&j| {
                boxes[j].class_id != boxes[top].class_id || iou3d(&boxes[j].bbox, &boxes[top].bbox) < thr
            });
        }
        kept
    }

    proptest! {
        #[test]
        fn measures_are_symmetric(a in arb_box(), b in arb_box()) {
            for axis in Axis::ALL {
                prop_assert_eq!(axis_distance(&a, &b, axis), axis_distance(&b, &a, axis));
            }
            for plane in Plane::ALL {
                prop_assert_eq!(plane_overlap(&a, &b, plane).ratio, plane_overlap(&b, &a, plane).ratio);
            }
            prop_assert_eq!(iou3d(&a, &b), iou3d(&b, &a));
            prop_assert_eq!(center_distance(&a, &b), center_distance(&b, &a));
        }

        #[test]
        fn measures_stay_in_range(a in arb_box(), b in arb_box()) {
            let iou = iou3d(&a, &b);
            prop_assert!((0.0..=1.0).contains(&iou));
            for plane in Plane::ALL {
                let r = plane_overlap(&a, &b, plane).ratio;
                prop_assert!((0.0..=1.0).contains(&r));
            }
            for axis in Axis::ALL {
                prop_assert!(axis_distance(&a, &b, axis) >= 0.0);
            }
        }

        #[test]
        fn measures_are_translation_invariant(
            a in arb_box(),
            b in arb_box(),
            off in prop::array::uniform3(-10.0f64..10.0),
        ) {
            let (ta, tb) = (a.translated(off).unwrap(), b.translated(off).unwrap());
            for axis in Axis::ALL {
                prop_assert!((axis_distance(&a, &b, axis) - axis_distance(&ta, &tb, axis)).abs() < 1e-12);
            }
            for plane in Plane::ALL {
                let d = plane_overlap(&a, &b, plane).ratio - plane_overlap(&ta, &tb, plane).ratio;
                prop_assert!(d.abs() < 1e-12);
            }
            prop_assert!((iou3d(&a, &b) - iou3d(&ta, &tb)).abs() < 1e-12);
            prop_assert!((center_distance(&a, &b) - center_distance(&ta, &tb)).abs() < 1e-12);
        }

        #[test]
        fn center_distance_matches_midpoint_arithmetic(a in arb_box(), b in arb_box()) {
            let mid = |bb: &Aabb3<f64>, i: usize| (bb.min()[i] + bb.max()[i]) / 2.0;
            let d2: f64 = (0..3).map(|i| (mid(&a, i) - mid(&b, i)).powi(2)).sum();
            prop_assert!((center_distance(&a, &b) - d2.sqrt()).abs() < 1e-12);
        }

        #[test]
        fn nms_matches_reference(
            raw in prop::collection::vec((arb_box(), 0.0f64..1.0, 0usize..3), 0..=10),
            thr in 0.05f64..1.0,
        ) {
            let boxes: Vec<_> = raw
                .into_iter()
                .map(|(bbox, score, class_id)| ScoredBox { bbox, score: (score * 8.0).round() / 8.0, class_id })
                .collect();
            prop_assert_eq!(nms3d(&boxes, thr).unwrap(), nms_reference(&boxes, thr));
        }
    }
}
