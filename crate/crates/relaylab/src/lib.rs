//! Achievable-rate analysis for two-hop amplify-and-forward OFDM relays
//! with unitary linear processing.
//!
//! The library models frequency-selective relay channels, evaluates the
//! end-to-end achievable rate of arbitrary unitary relay processing
//! matrices, constructs the rate-optimal subcarrier pairing with and
//! without a direct source-destination path, and provides the numerical
//! machinery (exhaustive and assignment-solver oracles, coordinate ascent
//! over the unitary group, determinant bounds) used to verify that sorted
//! pairing is optimal among all unitary processing schemes.
//!
//! The `relaylab` binary exposes the same functionality as a command line:
//! `relaylab pair | verify | sweep`.

pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod pairing;
pub mod rate;
pub mod report;
pub mod unitary;

pub use channel::{
    derive_relay_gain, frequency_response, generate_channel, pairing_metrics,
    ChannelRealization, Geometry, PairingMetrics, SystemParams,
};
pub use error::{Error, Result};
pub use experiments::{
    evaluate_schemes, power_from_snr, run_position_sweep, run_snr_sweep, substream_seed,
    ScenarioConfig, Scheme, SweepResult, SweepRow,
};
pub use pairing::{
    assignment_pairing, brute_force_pairing, sorted_pairing, Permutation,
    DEFAULT_ENUMERATION_LIMIT,
};
pub use rate::{
    pair_sinr, rate_general, rate_pairing, unitarity_residual, EquivalentModel, PairRate,
    RateBreakdown, UNITARITY_TOL,
};
pub use unitary::{
    ascend_rate, directional_derivative, haar_random, psd_det_bound_check, unitary_2x2,
    AscentResult, GramMatrix, UnitaryMatrix,
};

#[cfg(test)]
pub(crate) mod fixtures {
    //! Shared test scenarios and small independent oracles.

    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::channel::{generate_channel, ChannelRealization, Geometry, SystemParams};
    use crate::pairing::Permutation;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Two-subcarrier relay-only scenario with unit noise, `d_s = [1, 1]`,
    /// `|h1| = [2, 1]`, `|h2| = [1, 3]` and the relay budget chosen so that
    /// the relay gain is exactly 1. Effective gains: `q2 = [4, 1]`,
    /// `p2 = [0.5, 0.9]`.
    pub(crate) fn toy_t1() -> (SystemParams, ChannelRealization) {
        let params = SystemParams::new(2, 1.0, 1.0, 2.0, 7.0, vec![1.0, 1.0], false).unwrap();
        let chan = ChannelRealization::new(
            vec![c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(2.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(3.0, 0.0)],
        )
        .unwrap();
        (params, chan)
    }

    /// `toy_t1` plus a direct path with `|h0| = [1, 2]`, giving
    /// `snr_sd = [1, 4]`.
    pub(crate) fn toy_t2() -> (SystemParams, ChannelRealization) {
        let params = SystemParams::new(2, 1.0, 1.0, 2.0, 7.0, vec![1.0, 1.0], true).unwrap();
        let chan = ChannelRealization::new(
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(3.0, 0.0)],
        )
        .unwrap();
        (params, chan)
    }

    /// Random scenario at the default geometry with a uniformly drawn
    /// operating SNR in [0, 20) dB.
    pub(crate) fn random_scenario(
        rng: &mut impl Rng,
        n: usize,
        direct: bool,
    ) -> (SystemParams, ChannelRealization) {
        let taps = 4.min(n);
        let geom = Geometry::new(20.0, 6.0, 16.0, 2.0, taps).unwrap();
        let snr_db: f64 = rng.random_range(0.0..20.0);
        let params = crate::experiments::power_from_snr(snr_db, &geom, n)
            .with_direct_path(direct);
        let chan = generate_channel(&geom, &params, rng).unwrap();
        (params, chan)
    }

    pub(crate) fn random_permutation(n: usize, rng: &mut impl Rng) -> Permutation {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Permutation::new(map).unwrap()
    }

    pub(crate) fn random_complex_matrix(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |_, _| {
            c(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        })
    }

    /// Random skew-Hermitian direction with unit Frobenius norm.
    pub(crate) fn random_skew_hermitian(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
        let z = random_complex_matrix(n, rng);
        let mut s = (&z - z.adjoint()) * Complex64::new(0.5, 0.0);
        let norm: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            s /= Complex64::new(norm, 0.0);
        }
        s
    }

    /// Real rotation generator on coordinates `(i, j)`.
    pub(crate) fn skew_real_pair(n: usize, i: usize, j: usize) -> DMatrix<Complex64> {
        let mut s = DMatrix::zeros(n, n);
        s[(i, j)] = c(1.0, 0.0);
        s[(j, i)] = c(-1.0, 0.0);
        s
    }

    /// Imaginary (phase-mixing) generator on coordinates `(i, j)`.
    pub(crate) fn skew_imag_pair(n: usize, i: usize, j: usize) -> DMatrix<Complex64> {
        let mut s = DMatrix::zeros(n, n);
        s[(i, j)] = c(0.0, 1.0);
        s[(j, i)] = c(0.0, 1.0);
        s
    }

    /// Cofactor-expansion determinant, an implementation-independent oracle
    /// for small matrices.
    pub(crate) fn naive_determinant(m: &DMatrix<Complex64>) -> Complex64 {
        let n = m.nrows();
        if n == 0 {
            return c(1.0, 0.0);
        }
        if n == 1 {
            return m[(0, 0)];
        }
        let mut det = c(0.0, 0.0);
        let mut sign = 1.0;
        for col in 0..n {
            let minor = DMatrix::from_fn(n - 1, n - 1, |i, j| {
                let jj = if j < col { j } else { j + 1 };
                m[(i + 1, jj)]
            });
            det += m[(0, col)] * naive_determinant(&minor) * c(sign, 0.0);
            sign = -sign;
        }
        det
    }
}
