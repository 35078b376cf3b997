//! Partner selection: `k` partners per anchor object.

use std::cmp::Ordering;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom3d::point_distance;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    Random,
    Nearest,
}

impl std::str::FromStr for PairingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PairingMode::Random),
            "nearest" => Ok(PairingMode::Nearest),
            other => Err(Error::invalid(format!("unknown pairing mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingConfig {
    pub k: usize,
    pub mode: PairingMode,
    pub seed: u64,
}

impl Default for PairingConfig {
    fn default() -> Self {
        Self { k: 8, mode: PairingMode::Random, seed: 0 }
    }
}

/// Ordered `(anchor, partner)` pairs grouped by anchor.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairSet {
    pairs: Vec<(usize, usize)>,
    per_anchor: Vec<Vec<usize>>,
    isolated: Vec<usize>,
}

impl PairSet {
    /// Builds a pair set from explicit partner lists, one per anchor.
    pub fn from_partner_lists(per_anchor: Vec<Vec<usize>>) -> Result<Self> {
        let n = per_anchor.len();
        let mut pairs = Vec::new();
        let mut isolated = Vec::new();
        for (anchor, partners) in per_anchor.iter().enumerate() {
            if partners.is_empty() {
                isolated.push(anchor);
            }
            for &p in partners {
                if p >= n {
                    return Err(Error::invalid(format!("partner {p} out of range for {n} objects")));
                }
                if p == anchor {
                    return Err(Error::invalid(format!("object {anchor} paired with itself")));
                }
                pairs.push((anchor, p));
            }
        }
        Ok(Self { pairs, per_anchor, isolated })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn partners(&self, anchor: usize) -> &[usize] {
        &self.per_anchor[anchor]
    }

    pub fn n_objects(&self) -> usize {
        self.per_anchor.len()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Anchors for which no partner exists (single-object scenes).
    pub fn isolated(&self) -> &[usize] {
        &self.isolated
    }
}

/// Selects `cfg.k` partners for each of `n_objects` anchors.
///
/// Random mode draws without replacement when at least `k` other objects
/// exist and with replacement otherwise. Nearest mode takes the `k` closest
/// centers (ties by index), cycling when fewer than `k` others exist.
pub fn build_pairs<T: Real>(n_objects: usize, centers: &[[T; 3]], cfg: &PairingConfig) -> Result<PairSet> {
    if n_objects == 0 {
        return Err(Error::invalid("cannot pair an empty scene"));
    }
    if centers.len() != n_objects {
        return Err(Error::dims("build_pairs centers", n_objects, centers.len()));
    }
    if cfg.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }

    let k = cfg.k;
    let others = n_objects - 1;
    let mut lists = Vec::with_capacity(n_objects);
    match cfg.mode {
        PairingMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for anchor in 0..n_objects {
                // Draw from 0..others and skip over the anchor itself.
                let shift = |v: usize| if v >= anchor { v + 1 } else { v };
                let partners: Vec<usize> = if others == 0 {
                    Vec::new()
                } else if others >= k {
                    index::sample(&mut rng, others, k).into_iter().map(shift).collect()
                } else {
                    (0..k).map(|_| shift(rng.random_range(0..others))).collect()
                };
                lists.push(partners);
            }
        }
        PairingMode::Nearest => {
            for anchor in 0..n_objects {
                let mut by_dist: Vec<(T, usize)> = (0..n_objects)
                    .filter(|&j| j != anchor)
                    .map(|j| (point_distance(centers[anchor], centers[j]), j))
                    .collect();
                by_dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
                let partners: Vec<usize> = if by_dist.is_empty() {
                    Vec::new()
                } else {
                    by_dist.iter().cycle().take(k).map(|&(_, j)| j).collect()
                };
                lists.push(partners);
            }
        }
    }
    PairSet::from_partner_lists(lists)
}

/// Every unordered pair `(i, j)` with `i < j`.
pub fn all_unordered_pairs(n_objects: usize) -> Vec<(usize, usize)> {
    (0..n_objects).flat_map(|i| (i + 1..n_objects).map(move |j| (i, j))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(n: usize) -> Vec<[f64; 3]> {
        (0..n).map(|i| [i as f64, 0.0, 0.0]).collect()
    }

    #[test]
    fn single_object_is_isolated() {
        let cfg = PairingConfig { k: 8, mode: PairingMode::Random, seed: 1 };
        let ps = build_pairs(1, &line(1), &cfg).unwrap();
        assert!(ps.is_empty());
        assert!(ps.partners(0).is_empty());
        assert_eq!(ps.isolated(), &[0]);
    }

    #[test]
    fn tiny_scene_draws_with_replacement() {
        let cfg = PairingConfig { k: 8, mode: PairingMode::Random, seed: 3 };
        let ps = build_pairs(3, &line(3), &cfg).unwrap();
        for a in 0..3 {
            assert_eq!(ps.partners(a).len(), 8);
            assert!(ps.partners(a).iter().all(|&p| p != a && p < 3));
        }
    }

    #[test]
    fn random_without_replacement_when_possible() {
        let cfg = PairingConfig { k: 8, mode: PairingMode::Random, seed: 9 };
        let ps = build_pairs(20, &line(20), &cfg).unwrap();
        for a in 0..20 {
            let mut p = ps.partners(a).to_vec();
            p.sort();
            p.dedup();
            assert_eq!(p.len(), 8);
        }
    }

    #[test]
    fn nearest_on_a_line() {
        let cfg = PairingConfig { k: 2, mode: PairingMode::Nearest, seed: 0 };
        let ps = build_pairs(4, &line(4), &cfg).unwrap();
        assert_eq!(ps.partners(0), &[1, 2]);
        // Ties (x=0 and x=2 from x=1) resolve by index.
        assert_eq!(ps.partners(1), &[0, 2]);
    }

    #[test]
    fn nearest_cycles_in_small_scenes() {
        let cfg = PairingConfig { k: 5, mode: PairingMode::Nearest, seed: 0 };
        let ps = build_pairs(3, &line(3), &cfg).unwrap();
        assert_eq!(ps.partners(0), &[1, 2, 1, 2, 1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = PairingConfig::default();
        assert!(build_pairs::<f64>(0, &[], &cfg).is_err());
        assert!(build_pairs(2, &line(3), &cfg).is_err());
        let zero_k = PairingConfig { k: 0, ..cfg };
        assert!(build_pairs(2, &line(2), &zero_k).is_err());
        assert!(PairSet::from_partner_lists(vec![vec![0]]).is_err());
    }

    #[test]
    fn unordered_pairs_count() {
        assert_eq!(all_unordered_pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(all_unordered_pairs(1).is_empty());
    }

    fn arb_centers() -> impl Strategy<Value = Vec<[f64; 3]>> {
        prop::collection::vec(prop::array::uniform3((-20i32..20).prop_map(|v| v as f64 * 0.25)), 1..50)
    }

    proptest! {
        #[test]
        fn deterministic_and_self_free(centers in arb_centers(), k in 1usize..10, seed: u64, nearest: bool) {
            let mode = if nearest { PairingMode::Nearest } else { PairingMode::Random };
            let cfg = PairingConfig { k, mode, seed };
            let n = centers.len();
            let a = build_pairs(n, &centers, &cfg).unwrap();
            let b = build_pairs(n, &centers, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.pairs().iter().all(|&(i, j)| i != j));
            for anchor in 0..n {
                let expected = if n > 1 { k } else { 0 };
                prop_assert_eq!(a.partners(anchor).len(), expected);
            }
        }

        #[test]
        fn nearest_matches_brute_force(centers in arb_centers(), k in 1usize..10) {
            let n = centers.len();
            prop_assume!(n > k);
            let cfg = PairingConfig { k, mode: PairingMode::Nearest, seed: 0 };
            let ps = build_pairs(n, &centers, &cfg).unwrap();
            for anchor in 0..n {
                // Brute force: repeatedly pick the unused closest index.
                let mut used = vec![false; n];
                used[anchor] = true;
                let mut expected = Vec::new();
                for _ in 0..k {
                    let mut best: Option<usize> = None;
                    for j in 0..n {
                        if used[j] { continue; }
                        let d = |q: usize| (0..3).map(|c| (centers[anchor][c] - centers[q][c]).powi(2)).sum::<f64>();
                        if best.is_none_or(|b| d(j) < d(b)) {
                            best = Some(j);
                        }
                    }
                    let b = best.unwrap();
                    used[b] = true;
                    expected.push(b);
                }
                prop_assert_eq!(ps.partners(anchor), expected.as_slice());
            }
        }
    }
}
