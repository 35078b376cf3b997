mod common;

use common::*;
use rel3d::geom3d::Aabb3;
use rel3d::relations::{relation_labels_batch, spatial_relations, spatial_relations_batch, AnnotatedObject, BoxTable, RelationThresholds, BACKGROUND};

fn t() -> RelationThresholds<f64> {
    RelationThresholds::default()
}

fn check_all(boxes: &[Aabb3<f64>], pairs: &[(usize, usize)], t: &RelationThresholds<f64>) {
    let table = BoxTable::new(boxes, t).unwrap();
    let batched = spatial_relations_batch(&table, pairs).unwrap();
    for (&(i, j), got) in pairs.iter().zip(batched) {
        let want = oracle_spatial(&corners(&boxes[i]), &corners(&boxes[j]), t);
        assert_eq!(spatial_relations(&boxes[i], &boxes[j], t), want, "scalar, pair {i},{j}");
        assert_eq!(got, want, "batched, pair {i},{j}: {:?} {:?}", boxes[i], boxes[j]);
    }
}

#[test]
fn scalar_and_batched_match_oracle_on_random_pairs() {
    for seed in 0..5 {
        let boxes = loose_boxes(200, seed);
        check_all(&boxes, &random_pairs(200, 1000, seed + 100), &t());
    }
}

#[test]
fn snapped_boxes_exercise_the_boundaries() {
    let boxes = snapped_boxes(300, 7);
    let pairs = random_pairs(300, 20_000, 8);
    check_all(&boxes, &pairs, &t());
    let table = BoxTable::new(&boxes, &t()).unwrap();
    let hits = spatial_relations_batch(&table, &pairs).unwrap().iter().filter(|(s, h)| *s || *h).count();
    assert!(hits > 200, "only {hits} related pairs");
}

#[test]
fn psi_equal_to_tau_counts_as_near() {
    // Gap of exactly 0.25 (representable) with tau_z = 0.25.
    let t = RelationThresholds { tau_z: 0.25, ..t() };
    let table = aabb([0.0, 0.0, 0.0, 1.0, 1.0, 0.5]);
    let above = aabb([0.0, 0.0, 0.75, 1.0, 1.0, 1.0]);
    assert_eq!(oracle_spatial(&corners(&table), &corners(&above), &t), (true, false));
    check_all(&[table, above], &[(0, 1), (1, 0)], &t);
    let higher = aabb([0.0, 0.0, 0.875, 1.0, 1.0, 1.0]);
    assert_eq!(spatial_relations(&table, &higher, &t), (false, false));
    check_all(&[table, higher], &[(0, 1)], &t);
}

#[test]
fn omega_equal_to_tau_is_not_enough() {
    // xy overlap is exactly half of each footprint.
    let a = aabb([0.0, 0.0, 0.0, 1.0, 1.0, 0.5]);
    let b = aabb([0.5, 0.0, 0.5, 1.5, 1.0, 1.0]);
    assert_eq!(oracle_spatial(&corners(&a), &corners(&b), &t()), (false, false));
    check_all(&[a, b], &[(0, 1), (1, 0)], &t());
    let c = aabb([0.25, 0.0, 0.5, 1.25, 1.0, 1.0]);
    assert_eq!(spatial_relations(&a, &c, &t()), (true, false));
    check_all(&[a, c], &[(0, 1)], &t());
}

#[test]
fn touching_faces_and_degenerate_boxes() {
    let wall = aabb([0.0, 0.0, 0.0, 4.0, 0.1, 2.5]);
    let board = aabb([1.0, 0.1, 1.0, 2.0, 0.12, 2.0]);
    let flat = aabb([1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
    let point = aabb([3.0, 3.0, 1.0, 3.0, 3.0, 1.0]);
    let on_flat = aabb([1.2, 1.2, 0.0, 1.8, 1.8, 0.4]);
    let boxes = [wall, board, flat, point, on_flat];
    assert_eq!(spatial_relations(&wall, &board, &t()), (false, true));
    assert_eq!(spatial_relations(&flat, &on_flat, &t()), (true, false));
    assert_eq!(spatial_relations(&point, &point, &t()), (false, false));
    let all: Vec<_> = (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).collect();
    check_all(&boxes, &all, &t());
}

#[test]
fn huge_coordinates_agree() {
    let offset = 1.0e12;
    let base = snapped_boxes(100, 3);
    let shifted: Vec<_> = base.iter().map(|b| b.translated([offset, -offset, offset]).unwrap()).collect();
    let mixed: Vec<_> = base.iter().chain(&shifted).copied().chain([aabb([-1e15, -1e15, -1e15, 1e15, 1e15, 1e15])]).collect();
    check_all(&mixed, &random_pairs(mixed.len(), 5000, 4), &t());
}

#[test]
fn f32_batch_matches_f32_scalar() {
    let t32 = RelationThresholds::<f32>::default();
    let boxes: Vec<Aabb3<f32>> = snapped_boxes(200, 11)
        .iter()
        .map(|b| {
            let (lo, hi) = (b.min(), b.max());
            Aabb3::new(lo.map(|v| v as f32), hi.map(|v| v as f32)).unwrap()
        })
        .collect();
    let pairs = random_pairs(200, 5000, 12);
    let table = BoxTable::new(&boxes, &t32).unwrap();
    let batched = spatial_relations_batch(&table, &pairs).unwrap();
    for (&(i, j), got) in pairs.iter().zip(batched) {
        assert_eq!(got, spatial_relations(&boxes[i], &boxes[j], &t32));
    }
}

#[test]
fn exclusive_and_symmetric_on_ten_thousand_pairs() {
    let boxes = snapped_boxes(500, 21);
    let pairs = random_pairs(500, 10_000, 22);
    let reversed: Vec<_> = pairs.iter().map(|&(i, j)| (j, i)).collect();
    let table = BoxTable::new(&boxes, &t()).unwrap();
    let fwd = spatial_relations_batch(&table, &pairs).unwrap();
    let back = spatial_relations_batch(&table, &reversed).unwrap();
    for (k, (f, b)) in fwd.iter().zip(&back).enumerate() {
        assert!(!(f.0 && f.1), "pair {k} both support and hang_on");
        assert_eq!(f, b, "pair {k} not symmetric");
    }
}

#[test]
fn semantic_labels_follow_ids() {
    let b = aabb([0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let objects = [
        AnnotatedObject { bbox: b, class_id: 2, instance_id: 0 },
        AnnotatedObject { bbox: b, class_id: 2, instance_id: 1 },
        AnnotatedObject { bbox: b, class_id: 2, instance_id: 0 },
        AnnotatedObject { bbox: b, class_id: BACKGROUND, instance_id: BACKGROUND },
    ];
    let labels = relation_labels_batch(&objects, &[(0, 1), (0, 2), (3, 3), (0, 3)], &t()).unwrap();
    assert_eq!(labels.iter().map(|l| (l.group, l.same_as)).collect::<Vec<_>>(), [(true, false), (true, true), (false, false), (false, false)]);
}

#[test]
fn out_of_range_pair_is_an_error() {
    let boxes = snapped_boxes(3, 0);
    let table = BoxTable::new(&boxes, &t()).unwrap();
    assert!(spatial_relations_batch(&table, &[(0, 3)]).is_err());
}
