mod common;

use common::probe;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rel3d::neural::{relation_forward, Aggregate, RelationDims, RelationModuleParams, Tensor2};
use rel3d::pairing::{build_pairs, PairSet, PairingConfig, PairingMode};

const TOL: f64 = 1e-9;

fn setup(aggregate: Aggregate) -> (RelationModuleParams<f64>, Tensor2<f64>, PairSet) {
    let dims = RelationDims::default();
    let p = RelationModuleParams::init(&dims, aggregate, &mut ChaCha8Rng::seed_from_u64(31));
    let n = 12;
    let x = Tensor2::from_vec(n, dims.feature_dim, probe(n * dims.feature_dim, 32)).unwrap();
    let pairs = build_pairs(n, &vec![[0.0; 3]; n], &PairingConfig { k: 5, mode: PairingMode::Random, seed: 33 }).unwrap();
    (p, x, pairs)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn partner_order_does_not_matter() {
    for aggregate in [Aggregate::Sum, Aggregate::Mean] {
        let (p, x, pairs) = setup(aggregate);
        let base = relation_forward(&p, &x, &pairs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..5 {
            let lists: Vec<Vec<usize>> = (0..pairs.n_objects())
                .map(|a| {
                    let mut l = pairs.partners(a).to_vec();
                    l.shuffle(&mut rng);
                    l
                })
                .collect();
            let shuffled = relation_forward(&p, &x, &PairSet::from_partner_lists(lists).unwrap()).unwrap();
            let d = max_abs_diff(base.relation_features.data(), shuffled.relation_features.data());
            assert!(d <= TOL, "{aggregate:?}: diff {d:e}");
        }
    }
}

#[test]
fn relabeling_objects_permutes_the_output() {
    let (p, x, pairs) = setup(Aggregate::Sum);
    let n = pairs.n_objects();
    let base = relation_forward(&p, &x, &pairs).unwrap();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(35));
    // Object i becomes object perm[i].
    let mut rows = vec![vec![]; n];
    let mut lists = vec![vec![]; n];
    for i in 0..n {
        rows[perm[i]] = x.row(i).to_vec();
        lists[perm[i]] = pairs.partners(i).iter().map(|&j| perm[j]).collect();
    }
    let y = relation_forward(&p, &Tensor2::from_rows(&rows).unwrap(), &PairSet::from_partner_lists(lists).unwrap()).unwrap();
    for i in 0..n {
        let d = max_abs_diff(base.relation_features.row(i), y.relation_features.row(perm[i]));
        assert!(d <= TOL, "object {i}: diff {d:e}");
    }
}

#[test]
fn mean_ignores_repeated_partner_lists_and_sum_does_not() {
    for (aggregate, same) in [(Aggregate::Mean, true), (Aggregate::Sum, false)] {
        let (p, x, pairs) = setup(aggregate);
        let doubled: Vec<Vec<usize>> = (0..pairs.n_objects()).map(|a| pairs.partners(a).repeat(2)).collect();
        let a = relation_forward(&p, &x, &pairs).unwrap();
        let b = relation_forward(&p, &x, &PairSet::from_partner_lists(doubled).unwrap()).unwrap();
        let d = max_abs_diff(a.relation_features.data(), b.relation_features.data());
        assert_eq!(d <= TOL, same, "{aggregate:?}: diff {d:e}");
    }
}

#[test]
fn isolated_anchor_gets_zero_features() {
    let dims = RelationDims::default();
    let p = RelationModuleParams::<f64>::init(&dims, Aggregate::Sum, &mut ChaCha8Rng::seed_from_u64(36));
    let x = Tensor2::from_vec(1, dims.feature_dim, probe(dims.feature_dim, 37)).unwrap();
    let pairs = build_pairs(1, &[[0.0; 3]], &PairingConfig::default()).unwrap();
    let out = relation_forward(&p, &x, &pairs).unwrap();
    assert_eq!(pairs.isolated(), &[0]);
    assert!(out.relation_features.data().iter().all(|&v| v == 0.0));
}
