//! Subcarrier pairing: the sorted pairing that is provably rate-optimal
//! among permutations, plus two independent optimality oracles (exhaustive
//! enumeration and an exact linear-assignment solve).
//!
//! The sorted rule matches the i-th largest input key with the i-th largest
//! output key. Without a direct path the input key is `q2_i`; with a direct
//! path it is `q2_i / (1 + snr_sd_i)`. The output key is always `p2_j`.
//! These keys are positive multiples of the SNR-ratio forms, so the rankings
//! coincide.

use itertools::Itertools;

use crate::channel::PairingMetrics;
use crate::error::{Error, Result};
use crate::rate::rate_pairing;
use crate::unitary::UnitaryMatrix;

/// Largest `n` accepted by [`brute_force_pairing`] unless overridden.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 9;

/// A bijective map from input subcarriers to output subcarriers;
/// `map()[i] = j` means the relay retransmits the signal received on
/// subcarrier `i` over subcarrier `j`. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(Error::InvalidPermutation {
                reason: "empty map".into(),
            });
        }
        let mut seen = vec![false; n];
        for &j in &map {
            if j >= n {
                return Err(Error::InvalidPermutation {
                    reason: format!("index {j} out of range for length {n}"),
                });
            }
            if seen[j] {
                return Err(Error::InvalidPermutation {
                    reason: format!("duplicate target {j}"),
                });
            }
            seen[j] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Output subcarrier for input `i`.
    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0usize; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Self { map: inv }
    }

    /// The permutation matrix `W` with `W[map(i), i] = 1`, so that processing
    /// moves the signal on input subcarrier `i` to output subcarrier
    /// `map(i)`.
    pub fn to_unitary(&self) -> UnitaryMatrix {
        UnitaryMatrix::from_permutation(self)
    }
}

/// Key-sorted index order, descending by key with ties broken by ascending
/// index. Stable and deterministic for equal keys.
fn order_by_key_desc(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| {
        keys[b]
            .partial_cmp(&keys[a])
            .expect("pairing keys must not be NaN")
            .then(a.cmp(&b))
    });
    idx
}

/// The rate-optimal pairing among all permutations, by sorted matching of
/// the per-subcarrier keys. Runs in `O(N log N)`.
pub fn sorted_pairing(metrics: &PairingMetrics, direct: bool) -> Permutation {
    let n = metrics.n_subcarriers();
    let in_keys: Vec<f64> = if direct {
        metrics
            .q2
            .iter()
            .zip(&metrics.snr_sd)
            .map(|(q2, snr_sd)| q2 / (1.0 + snr_sd))
            .collect()
    } else {
        metrics.q2.clone()
    };
    let in_order = order_by_key_desc(&in_keys);
    let out_order = order_by_key_desc(&metrics.p2);
    let mut map = vec![0usize; n];
    for r in 0..n {
        map[in_order[r]] = out_order[r];
    }
    Permutation { map }
}

/// Exhaustive-enumeration oracle: maximizes the pairing rate over all `N!`
/// permutations, returning the lexicographically smallest maximizer and its
/// rate. Guarded by `limit` against factorial blow-up.
pub fn brute_force_pairing(
    metrics: &PairingMetrics,
    direct: bool,
    limit: usize,
) -> Result<(Permutation, f64)> {
    let n = metrics.n_subcarriers();
    if n > limit {
        return Err(Error::SizeLimit { n, limit });
    }
    let mut best: Option<(Permutation, f64)> = None;
    for candidate in (0..n).permutations(n) {
        let perm = Permutation { map: candidate };
        let rate = rate_pairing(&perm, metrics, direct)?.total_bits;
        let better = match &best {
            None => true,
            Some((_, best_rate)) => rate > *best_rate,
        };
        if better {
            best = Some((perm, rate));
        }
    }
    Ok(best.expect("n >= 1 guarantees at least one permutation"))
}

/// Exact `O(N^3)` minimum-cost assignment via shortest augmenting paths with
/// potentials. `cost` is row-major `n x n`; returns the column assigned to
/// each row.
fn solve_min_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // 1-based row matched to column j, 0 = free
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let reduced = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if reduced < min_slack[j] {
                        min_slack[j] = reduced;
                        way[j] = j0;
                    }
                    if min_slack[j] < delta {
                        delta = min_slack[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            row_to_col[matched_row[j] - 1] = j - 1;
        }
    }
    debug_assert!(row_to_col.iter().all(|&c| c != usize::MAX));
    row_to_col
}

/// Assignment-solver oracle: builds the benefit matrix of per-pair bits and
/// solves the linear assignment problem exactly. The returned permutation
/// attains the brute-force optimum (the permutation itself may differ under
/// ties).
pub fn assignment_pairing(metrics: &PairingMetrics, direct: bool) -> Permutation {
    let n = metrics.n_subcarriers();
    // maximize total bits = minimize negated benefits
    let mut cost = vec![0.0f64; n * n];
    for i in 0..n {
        let base = if direct { metrics.snr_sd[i] } else { 0.0 };
        for j in 0..n {
            let sinr = base + metrics.q2[i] * metrics.p2[j];
            cost[i * n + j] = -(0.5 * sinr.ln_1p() / std::f64::consts::LN_2);
        }
    }
    Permutation {
        map: solve_min_assignment(&cost, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{random_scenario, toy_t1, toy_t2};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_metrics(direct: bool) -> PairingMetrics {
        let (params, chan) = if direct { toy_t2() } else { toy_t1() };
        let d_r = crate::channel::derive_relay_gain(&params, &chan.h1);
        crate::channel::pairing_metrics(&params, &chan, d_r)
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![1, 0, 2]).is_ok());
        assert!(matches!(
            Permutation::new(vec![0, 0]),
            Err(Error::InvalidPermutation { .. })
        ));
        assert!(matches!(
            Permutation::new(vec![0, 2]),
            Err(Error::InvalidPermutation { .. })
        ));
        assert!(Permutation::new(vec![]).is_err());
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(p.inverse().map(), &[1, 2, 0]);
    }

    #[test]
    fn sorted_pairing_on_toys_is_forced_by_sort_order() {
        // q2 = [4, 1], p2 = [0.5, 0.9]: largest q2 pairs with largest p2.
        let m = toy_metrics(false);
        assert_eq!(sorted_pairing(&m, false).map(), &[1, 0]);
        // direct keys q2/(1+snr_sd) = [2, 0.2]: same matching.
        let m2 = toy_metrics(true);
        assert_eq!(sorted_pairing(&m2, true).map(), &[1, 0]);
    }

    #[test]
    fn degenerate_equal_keys_achieve_identity_rate() {
        let m = PairingMetrics {
            q2: vec![2.0; 4],
            p2: vec![0.4; 4],
            snr_sr: vec![2.0; 4],
            snr_rd: vec![1.0; 4],
            snr_sd: vec![0.0; 4],
            d_r: 1.0,
        };
        let sorted = sorted_pairing(&m, false);
        let id = Permutation::identity(4);
        let a = rate_pairing(&sorted, &m, false).unwrap().total_bits;
        let b = rate_pairing(&id, &m, false).unwrap().total_bits;
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn brute_force_on_toys() {
        let m = toy_metrics(false);
        let (perm, rate) = brute_force_pairing(&m, false, DEFAULT_ENUMERATION_LIMIT).unwrap();
        assert_eq!(perm.map(), &[1, 0]);
        assert_relative_eq!(rate, 0.5 * 6.9f64.log2(), max_relative = 1e-12);

        let m2 = toy_metrics(true);
        let (perm2, rate2) = brute_force_pairing(&m2, true, DEFAULT_ENUMERATION_LIMIT).unwrap();
        assert_eq!(perm2.map(), &[1, 0]);
        assert_relative_eq!(rate2, 2.4724, max_relative = 1e-4);
    }

    #[test]
    fn brute_force_singleton_and_guard() {
        let m = PairingMetrics {
            q2: vec![3.0],
            p2: vec![0.5],
            snr_sr: vec![3.0],
            snr_rd: vec![1.0],
            snr_sd: vec![0.0],
            d_r: 1.0,
        };
        let (perm, rate) = brute_force_pairing(&m, false, DEFAULT_ENUMERATION_LIMIT).unwrap();
        assert_eq!(perm.map(), &[0]);
        assert_relative_eq!(rate, 0.5 * 2.5f64.log2(), max_relative = 1e-12);

        let big = PairingMetrics {
            q2: vec![1.0; 12],
            p2: vec![0.5; 12],
            snr_sr: vec![1.0; 12],
            snr_rd: vec![1.0; 12],
            snr_sd: vec![0.0; 12],
            d_r: 1.0,
        };
        assert!(matches!(
            brute_force_pairing(&big, false, DEFAULT_ENUMERATION_LIMIT),
            Err(Error::SizeLimit { n: 12, limit: 9 })
        ));
    }

    #[test]
    fn assignment_matches_brute_force_on_toys_and_degenerate_rows() {
        let m = toy_metrics(false);
        let perm = assignment_pairing(&m, false);
        let rate = rate_pairing(&perm, &m, false).unwrap().total_bits;
        assert_relative_eq!(rate, 0.5 * 6.9f64.log2(), max_relative = 1e-12);

        // one input with zero gain may map anywhere; totals still agree
        let degenerate = PairingMetrics {
            q2: vec![0.0, 3.0, 1.0],
            p2: vec![0.2, 0.9, 0.4],
            snr_sr: vec![0.0, 3.0, 1.0],
            snr_rd: vec![0.25, 9.0, 0.66],
            snr_sd: vec![0.0; 3],
            d_r: 1.0,
        };
        let (_, best) = brute_force_pairing(&degenerate, false, 9).unwrap();
        let assigned = assignment_pairing(&degenerate, false);
        let got = rate_pairing(&assigned, &degenerate, false).unwrap().total_bits;
        assert_relative_eq!(got, best, max_relative = 1e-12);
    }

    #[test]
    fn sorted_equals_brute_force_over_random_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(515);
        for n in 2..=5usize {
            for _ in 0..40 {
                for &direct in &[false, true] {
                    let (params, chan) = random_scenario(&mut rng, n, direct);
                    let d_r = crate::channel::derive_relay_gain(&params, &chan.h1);
                    let m = crate::channel::pairing_metrics(&params, &chan, d_r);
                    let sorted = sorted_pairing(&m, direct);
                    let sorted_rate = rate_pairing(&sorted, &m, direct).unwrap().total_bits;
                    let (_, best_rate) = brute_force_pairing(&m, direct, 9).unwrap();
                    assert_relative_eq!(sorted_rate, best_rate, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn assignment_agrees_with_sorted_at_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(8787);
        let (params, chan) = random_scenario(&mut rng, 128, true);
        let d_r = crate::channel::derive_relay_gain(&params, &chan.h1);
        let m = crate::channel::pairing_metrics(&params, &chan, d_r);
        for &direct in &[false, true] {
            let sorted = sorted_pairing(&m, direct);
            let assigned = assignment_pairing(&m, direct);
            let a = rate_pairing(&sorted, &m, direct).unwrap().total_bits;
            let b = rate_pairing(&assigned, &m, direct).unwrap().total_bits;
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn sorted_dominates_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let (params, chan) = random_scenario(&mut rng, 8, true);
            let d_r = crate::channel::derive_relay_gain(&params, &chan.h1);
            let m = crate::channel::pairing_metrics(&params, &chan, d_r);
            for &direct in &[false, true] {
                let sorted = sorted_pairing(&m, direct);
                let a = rate_pairing(&sorted, &m, direct).unwrap().total_bits;
                let b = rate_pairing(&Permutation::identity(8), &m, direct)
                    .unwrap()
                    .total_bits;
                assert!(a >= b - 1e-12);
            }
        }
    }

    #[test]
    fn chosen_map_is_invariant_to_input_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..20 {
            let (params, chan) = random_scenario(&mut rng, 7, true);
            let d_r = crate::channel::derive_relay_gain(&params, &chan.h1);
            let m = crate::channel::pairing_metrics(&params, &chan, d_r);
            let scale: f64 = rng.random_range(0.1..10.0);
            let mut scaled = m.clone();
            for q in scaled.q2.iter_mut() {
                *q *= scale;
            }
            for &direct in &[false, true] {
                assert_eq!(
                    sorted_pairing(&m, direct).map(),
                    sorted_pairing(&scaled, direct).map()
                );
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sorted_pairing_dominates_fixed_maps_for_arbitrary_gains(
                gains in proptest::collection::vec(
                    (0.0f64..100.0, 0.0f64..0.99, 0.0f64..50.0),
                    1..=12,
                ),
                direct: bool,
            ) {
                let n = gains.len();
                let metrics = PairingMetrics {
                    q2: gains.iter().map(|g| g.0).collect(),
                    p2: gains.iter().map(|g| g.1).collect(),
                    snr_sr: gains.iter().map(|g| g.0).collect(),
                    snr_rd: gains.iter().map(|g| g.1).collect(),
                    snr_sd: gains.iter().map(|g| g.2).collect(),
                    d_r: 1.0,
                };
                let sorted = sorted_pairing(&metrics, direct);
                prop_assert!(Permutation::new(sorted.map().to_vec()).is_ok());
                let best = rate_pairing(&sorted, &metrics, direct).unwrap().total_bits;
                let id = rate_pairing(&Permutation::identity(n), &metrics, direct)
                    .unwrap()
                    .total_bits;
                let reversal = Permutation::new((0..n).rev().collect()).unwrap();
                let rev = rate_pairing(&reversal, &metrics, direct).unwrap().total_bits;
                let slack = 1e-9 * best.max(1.0);
                prop_assert!(best >= id - slack);
                prop_assert!(best >= rev - slack);
            }
        }
    }

    #[test]
    fn rearrangement_inequality_by_enumeration() {
        // product form: similarly-ordered matching maximizes prod(1 + a_i b_perm(i))
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for n in 1..=5usize {
            for _ in 0..20 {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
                let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
                let mut a_sorted = a.clone();
                let mut b_sorted = b.clone();
                a_sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
                b_sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let matched: f64 = a_sorted
                    .iter()
                    .zip(&b_sorted)
                    .map(|(x, y)| 1.0 + x * y)
                    .product();
                for perm in (0..n).permutations(n) {
                    let value: f64 = (0..n).map(|i| 1.0 + a[i] * b[perm[i]]).product();
                    assert!(value <= matched * (1.0 + 1e-12));
                }
            }
        }
    }
}
