//! Physical-layer model: system parameters, frequency-selective channel
//! generation with path loss, the equal-amplification relay gain, and the
//! per-subcarrier effective-gain metrics consumed by the optimizers.
//!
//! The model covers three links (source-destination, source-relay,
//! relay-destination). Each link is a multi-tap delay profile whose DFT gives
//! the per-subcarrier complex gains. All quantities downstream of the raw
//! gains depend only on magnitudes, so the DFT convention (negative exponent,
//! unnormalized) matters only for reproducibility of the raw draws.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance for the source power constraint `sum d_sk^2 <= P_s`.
const POWER_TOL: f64 = 1e-9;

/// Transmit powers, noise variances and the per-subcarrier source power
/// allocation. Validated at construction; immutable afterwards.
#[derive(Debug, Clone)]
pub struct SystemParams {
    n_subcarriers: usize,
    sigma_r2: f64,
    sigma_d2: f64,
    p_s: f64,
    p_r: f64,
    d_s: Vec<f64>,
    direct_path: bool,
}

impl SystemParams {
    /// Builds parameters with an arbitrary (pre-determined) source power
    /// allocation `d_s`, checking `sum d_sk^2 <= p_s` up to rounding.
    pub fn new(
        n_subcarriers: usize,
        sigma_r2: f64,
        sigma_d2: f64,
        p_s: f64,
        p_r: f64,
        d_s: Vec<f64>,
        direct_path: bool,
    ) -> Result<Self> {
        if n_subcarriers == 0 {
            return Err(Error::InvalidParams("n_subcarriers must be >= 1".into()));
        }
        if !(sigma_r2 > 0.0) || !(sigma_d2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "noise variances must be positive (sigma_r2={sigma_r2}, sigma_d2={sigma_d2})"
            )));
        }
        if !(p_s > 0.0) || !(p_r > 0.0) {
            return Err(Error::InvalidParams(format!(
                "powers must be positive (p_s={p_s}, p_r={p_r})"
            )));
        }
        if d_s.len() != n_subcarriers {
            return Err(Error::DimensionMismatch(format!(
                "d_s has {} entries, expected {}",
                d_s.len(),
                n_subcarriers
            )));
        }
        if d_s.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidParams(
                "source power coefficients must be finite and nonnegative".into(),
            ));
        }
        let used: f64 = d_s.iter().map(|d| d * d).sum();
        if used > p_s * (1.0 + POWER_TOL) {
            return Err(Error::InvalidParams(format!(
                "source power constraint violated: sum d_sk^2 = {used} > p_s = {p_s}"
            )));
        }
        Ok(Self {
            n_subcarriers,
            sigma_r2,
            sigma_d2,
            p_s,
            p_r,
            d_s,
            direct_path,
        })
    }

    /// Equal power allocation `d_si = sqrt(p_s / n)` on every subcarrier.
    pub fn equal_power(
        n_subcarriers: usize,
        sigma_r2: f64,
        sigma_d2: f64,
        p_s: f64,
        p_r: f64,
        direct_path: bool,
    ) -> Result<Self> {
        if n_subcarriers == 0 {
            return Err(Error::InvalidParams("n_subcarriers must be >= 1".into()));
        }
        if !(p_s > 0.0) {
            return Err(Error::InvalidParams(format!("p_s must be positive ({p_s})")));
        }
        let d = (p_s / n_subcarriers as f64).sqrt();
        Self::new(
            n_subcarriers,
            sigma_r2,
            sigma_d2,
            p_s,
            p_r,
            vec![d; n_subcarriers],
            direct_path,
        )
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn sigma_r2(&self) -> f64 {
        self.sigma_r2
    }

    pub fn sigma_d2(&self) -> f64 {
        self.sigma_d2
    }

    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    pub fn p_r(&self) -> f64 {
        self.p_r
    }

    /// Per-subcarrier source power coefficients `d_sk`.
    pub fn d_s(&self) -> &[f64] {
        &self.d_s
    }

    pub fn direct_path(&self) -> bool {
        self.direct_path
    }

    /// Same parameters with the direct-path flag replaced.
    pub fn with_direct_path(mut self, direct_path: bool) -> Self {
        self.direct_path = direct_path;
        self
    }
}

/// Node placement and propagation model for random channel generation.
#[derive(Debug, Clone)]
pub struct Geometry {
    d_sd: f64,
    d_sr: f64,
    d_rd: f64,
    pathloss_exp: f64,
    taps_per_link: usize,
}

impl Geometry {
    pub fn new(
        d_sd: f64,
        d_sr: f64,
        d_rd: f64,
        pathloss_exp: f64,
        taps_per_link: usize,
    ) -> Result<Self> {
        if !(d_sd > 0.0) || !(d_sr > 0.0) || !(d_rd > 0.0) {
            return Err(Error::InvalidParams(format!(
                "distances must be positive (d_sd={d_sd}, d_sr={d_sr}, d_rd={d_rd})"
            )));
        }
        if !(pathloss_exp > 0.0) {
            return Err(Error::InvalidParams(format!(
                "pathloss exponent must be positive ({pathloss_exp})"
            )));
        }
        if taps_per_link == 0 {
            return Err(Error::InvalidParams("taps_per_link must be >= 1".into()));
        }
        Ok(Self {
            d_sd,
            d_sr,
            d_rd,
            pathloss_exp,
            taps_per_link,
        })
    }

    pub fn d_sd(&self) -> f64 {
        self.d_sd
    }

    pub fn d_sr(&self) -> f64 {
        self.d_sr
    }

    pub fn d_rd(&self) -> f64 {
        self.d_rd
    }

    pub fn pathloss_exp(&self) -> f64 {
        self.pathloss_exp
    }

    pub fn taps_per_link(&self) -> usize {
        self.taps_per_link
    }

    /// Collinear relay placement: distances for a given ratio `r = d_sr/d_rd`
    /// with `d_sr + d_rd = d_sd` held fixed.
    pub fn with_position_ratio(&self, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0) {
            return Err(Error::InvalidParams(format!(
                "position ratio must be positive ({ratio})"
            )));
        }
        let d_sr = ratio * self.d_sd / (1.0 + ratio);
        let d_rd = self.d_sd / (1.0 + ratio);
        Self::new(self.d_sd, d_sr, d_rd, self.pathloss_exp, self.taps_per_link)
    }
}

/// Per-subcarrier complex gains of the three links. `h0` is all-zeros when
/// the direct path is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h0: Vec<Complex64>,
    pub h1: Vec<Complex64>,
    pub h2: Vec<Complex64>,
}

impl ChannelRealization {
    /// Validates vector lengths and finiteness.
    pub fn new(h0: Vec<Complex64>, h1: Vec<Complex64>, h2: Vec<Complex64>) -> Result<Self> {
        let n = h1.len();
        if h0.len() != n || h2.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "link gain vectors differ in length ({}, {}, {})",
                h0.len(),
                n,
                h2.len()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParams("empty channel realization".into()));
        }
        for h in [&h0, &h1, &h2] {
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParams("channel gains must be finite".into()));
            }
        }
        Ok(Self { h0, h1, h2 })
    }

    pub fn n_subcarriers(&self) -> usize {
        self.h1.len()
    }
}

/// Per-subcarrier effective gains and SNRs, the inputs to every pairing
/// decision. `q2[i]` is the input-side gain `|h_1i d_si|^2`; `p2[j]` is the
/// output-side gain `|h_2j d_r|^2 / (sigma_d^2 + sigma_r^2 |h_2j d_r|^2)`,
/// a saturating map of the relay-destination SNR with asymptote
/// `1/sigma_r^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingMetrics {
    pub q2: Vec<f64>,
    pub p2: Vec<f64>,
    pub snr_sr: Vec<f64>,
    pub snr_rd: Vec<f64>,
    pub snr_sd: Vec<f64>,
    pub d_r: f64,
}

impl PairingMetrics {
    pub fn n_subcarriers(&self) -> usize {
        self.q2.len()
    }
}

/// Length-`n` frequency response of a tap profile:
/// `H_k = sum_l taps[l] * exp(-i 2 pi k l / n)`.
///
/// Satisfies Parseval's identity `(1/n) sum_k |H_k|^2 = sum_l |g_l|^2`
/// whenever the profile fits within one symbol (`taps.len() <= n`).
pub fn frequency_response(taps: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    let l = taps.len();
    if l == 0 || l > n {
        return Err(Error::InvalidTapProfile { taps: l, n });
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (li, g) in taps.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * (k as f64) * (li as f64) / (n as f64);
            acc += g * Complex64::new(phase.cos(), phase.sin());
        }
        out.push(acc);
    }
    Ok(out)
}

/// Draws `l` i.i.d. circularly-symmetric complex Gaussian taps with total
/// power `d^-alpha`, so the expected per-subcarrier gain power equals the
/// path loss.
fn random_taps(distance: f64, alpha: f64, l: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let per_tap_var = distance.powf(-alpha) / l as f64;
    let scale = (per_tap_var / 2.0).sqrt();
    (0..l)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * scale, im * scale)
        })
        .collect()
}

/// Generates a random frequency-selective channel realization.
///
/// Each link draws `taps_per_link` Gaussian taps with per-tap variance
/// `d^-alpha / L` and takes the frequency response. Draw order is fixed
/// (source-relay, relay-destination, then source-destination), so the relay
/// links of a given seed are identical whether or not the direct path is
/// enabled. With `direct_path` disabled `h0` is all-zeros and consumes no
/// randomness.
pub fn generate_channel(
    geometry: &Geometry,
    params: &SystemParams,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    let n = params.n_subcarriers();
    let l = geometry.taps_per_link();
    if l > n {
        return Err(Error::InvalidTapProfile { taps: l, n });
    }
    let alpha = geometry.pathloss_exp();
    let h1 = frequency_response(&random_taps(geometry.d_sr(), alpha, l, rng), n)?;
    let h2 = frequency_response(&random_taps(geometry.d_rd(), alpha, l, rng), n)?;
    let h0 = if params.direct_path() {
        frequency_response(&random_taps(geometry.d_sd(), alpha, l, rng), n)?
    } else {
        vec![Complex64::new(0.0, 0.0); n]
    };
    ChannelRealization::new(h0, h1, h2)
}

/// Equal-amplification relay gain
/// `d_r = sqrt(P_r / (sum_k d_sk^2 |h_1k|^2 + N sigma_r^2))`.
///
/// Under any unitary processing matrix the relay output power then meets the
/// relay power budget with equality; unitarity removes the matrix from the
/// expression entirely.
pub fn derive_relay_gain(params: &SystemParams, h1: &[Complex64]) -> f64 {
    let received: f64 = params
        .d_s()
        .iter()
        .zip(h1)
        .map(|(d, h)| d * d * h.norm_sqr())
        .sum();
    let denom = received + params.n_subcarriers() as f64 * params.sigma_r2();
    (params.p_r() / denom).sqrt()
}

/// Computes the effective-gain and SNR vectors for a realization.
pub fn pairing_metrics(
    params: &SystemParams,
    channel: &ChannelRealization,
    d_r: f64,
) -> PairingMetrics {
    let n = params.n_subcarriers();
    debug_assert_eq!(channel.n_subcarriers(), n);
    let sr2 = params.sigma_r2();
    let sd2 = params.sigma_d2();
    let d_s = params.d_s();

    let mut q2 = Vec::with_capacity(n);
    let mut p2 = Vec::with_capacity(n);
    let mut snr_sr = Vec::with_capacity(n);
    let mut snr_rd = Vec::with_capacity(n);
    let mut snr_sd = Vec::with_capacity(n);
    for k in 0..n {
        let g1 = channel.h1[k].norm_sqr();
        let g2 = channel.h2[k].norm_sqr();
        let g0 = channel.h0[k].norm_sqr();
        let ds2 = d_s[k] * d_s[k];
        q2.push(g1 * ds2);
        let amplified = g2 * d_r * d_r;
        p2.push(amplified / (sd2 + sr2 * amplified));
        snr_sr.push(g1 * ds2 / sr2);
        snr_rd.push(amplified / sd2);
        snr_sd.push(g0 * ds2 / sd2);
    }
    PairingMetrics {
        q2,
        p2,
        snr_sr,
        snr_rd,
        snr_sd,
        d_r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn impulse_gives_flat_response() {
        let h = frequency_response(&[c(1.0, 0.0)], 4).unwrap();
        for z in h {
            assert_relative_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_taps_give_zero_response() {
        let h = frequency_response(&[c(0.0, 0.0), c(0.0, 0.0)], 8).unwrap();
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn two_point_transform_by_hand() {
        // H_0 = 1 + 1, H_1 = 1 + exp(-i pi) = 0
        let h = frequency_response(&[c(1.0, 0.0), c(1.0, 0.0)], 2).unwrap();
        assert_relative_eq!(h[0].re, 2.0, epsilon = 1e-12);
        assert_relative_eq!(h[0].norm(), 2.0, epsilon = 1e-12);
        assert!(h[1].norm() < 1e-12);
    }

    #[test]
    fn tap_profile_length_is_validated() {
        assert!(matches!(
            frequency_response(&[], 4),
            Err(Error::InvalidTapProfile { taps: 0, n: 4 })
        ));
        let taps = vec![c(1.0, 0.0); 5];
        assert!(matches!(
            frequency_response(&taps, 4),
            Err(Error::InvalidTapProfile { taps: 5, n: 4 })
        ));
    }

    #[test]
    fn parseval_identity_over_tap_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 16;
        for l in 1..=n {
            let taps: Vec<Complex64> = (0..l)
                .map(|_| {
                    c(
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    )
                })
                .collect();
            let h = frequency_response(&taps, n).unwrap();
            let lhs: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            let rhs: f64 = taps.iter().map(|z| z.norm_sqr()).sum();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn relay_gain_direct_substitution() {
        // P_r=7, N=2, d_s=[1,1], |h1|=[2,1], sigma_r^2=1 -> d_r = 1
        let params = SystemParams::new(2, 1.0, 1.0, 2.0, 7.0, vec![1.0, 1.0], false).unwrap();
        let d_r = derive_relay_gain(&params, &[c(2.0, 0.0), c(0.0, 1.0)]);
        assert_relative_eq!(d_r, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn relay_gain_noise_only_denominator() {
        let params = SystemParams::new(2, 1.0, 1.0, 2.0, 4.0, vec![1.0, 1.0], false).unwrap();
        let d_r = derive_relay_gain(&params, &[c(0.0, 0.0), c(0.0, 0.0)]);
        assert_relative_eq!(d_r, 2.0_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn relay_gain_weak_budget() {
        let params = SystemParams::new(2, 1.0, 1.0, 2.0, 2.0, vec![1.0, 1.0], false).unwrap();
        let d_r = derive_relay_gain(&params, &[c(1.0, 0.0), c(1.0, 0.0)]);
        assert_relative_eq!(d_r, 0.5_f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn metrics_direct_evaluation() {
        // sigma_r^2 = sigma_d^2 = 1, d_r = 1, d_s = [1,1], |h1| = [2,1], |h2| = [1,3]
        let params = SystemParams::new(2, 1.0, 1.0, 2.0, 7.0, vec![1.0, 1.0], false).unwrap();
        let chan = ChannelRealization::new(
            vec![c(0.0, 0.0); 2],
            vec![c(2.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(3.0, 0.0)],
        )
        .unwrap();
        let m = pairing_metrics(&params, &chan, 1.0);
        assert_relative_eq!(m.q2[0], 4.0, epsilon = 1e-15);
        assert_relative_eq!(m.q2[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.p2[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.p2[1], 0.9, epsilon = 1e-15);
    }

    #[test]
    fn zero_relay_destination_link_gives_zero_p2() {
        let params = SystemParams::new(2, 1.0, 1.0, 2.0, 7.0, vec![1.0, 1.0], false).unwrap();
        let chan = ChannelRealization::new(
            vec![c(0.0, 0.0); 2],
            vec![c(2.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let m = pairing_metrics(&params, &chan, 1.0);
        assert!(m.p2.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn p2_is_saturating_map_of_snr_rd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let geom = Geometry::new(20.0, 6.0, 16.0, 2.0, 4).unwrap();
        let params = SystemParams::equal_power(8, 1.0, 1.0, 80.0, 80.0, true).unwrap();
        for _ in 0..50 {
            let chan = generate_channel(&geom, &params, &mut rng).unwrap();
            let d_r = derive_relay_gain(&params, &chan.h1);
            let m = pairing_metrics(&params, &chan, d_r);
            for j in 0..8 {
                let expected = m.snr_rd[j] / (1.0 + params.sigma_r2() * m.snr_rd[j]);
                assert_relative_eq!(m.p2[j], expected, max_relative = 1e-12);
                assert!(m.p2[j] < 1.0 / params.sigma_r2());
            }
            // monotone equivalence of the two sort keys
            let mut by_p2: Vec<usize> = (0..8).collect();
            let mut by_snr: Vec<usize> = (0..8).collect();
            by_p2.sort_by(|&a, &b| m.p2[b].partial_cmp(&m.p2[a]).unwrap());
            by_snr.sort_by(|&a, &b| m.snr_rd[b].partial_cmp(&m.snr_rd[a]).unwrap());
            assert_eq!(by_p2, by_snr);
        }
    }

    #[test]
    fn unit_distance_gain_power_is_calibrated() {
        // E|h_k|^2 = d^-alpha = 1 for d = 1, checked as a sample mean.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geom = Geometry::new(1.0, 1.0, 1.0, 2.0, 1).unwrap();
        let params = SystemParams::equal_power(4, 1.0, 1.0, 4.0, 4.0, false).unwrap();
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..25_000 {
            let chan = generate_channel(&geom, &params, &mut rng).unwrap();
            acc += chan.h1.iter().map(|z| z.norm_sqr()).sum::<f64>();
            count += chan.h1.len();
        }
        let mean = acc / count as f64;
        assert!((0.99..=1.01).contains(&mean), "sample mean {mean}");
    }

    #[test]
    fn direct_path_flag_controls_h0() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let geom = Geometry::new(20.0, 6.0, 16.0, 2.0, 3).unwrap();
        let params = SystemParams::equal_power(8, 1.0, 1.0, 8.0, 8.0, false).unwrap();
        let chan = generate_channel(&geom, &params, &mut rng).unwrap();
        assert!(chan.h0.iter().all(|z| z.norm() == 0.0));

        // relay links are unchanged by the flag for a fixed seed
        let with_direct = params.clone().with_direct_path(true);
        let mut rng_a = ChaCha8Rng::seed_from_u64(9);
        let mut rng_b = ChaCha8Rng::seed_from_u64(9);
        let chan_a = generate_channel(&geom, &params, &mut rng_a).unwrap();
        let chan_b = generate_channel(&geom, &with_direct, &mut rng_b).unwrap();
        assert_eq!(chan_a.h1, chan_b.h1);
        assert_eq!(chan_a.h2, chan_b.h2);
        assert!(chan_b.h0.iter().any(|z| z.norm() > 0.0));
    }

    #[test]
    fn same_seed_same_channel() {
        let geom = Geometry::new(20.0, 6.0, 16.0, 2.0, 5).unwrap();
        let params = SystemParams::equal_power(16, 1.0, 1.0, 16.0, 16.0, true).unwrap();
        let mut rng_a = ChaCha8Rng::seed_from_u64(42);
        let mut rng_b = ChaCha8Rng::seed_from_u64(42);
        let a = generate_channel(&geom, &params, &mut rng_a).unwrap();
        let b = generate_channel(&geom, &params, &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn params_reject_power_overrun() {
        let err = SystemParams::new(2, 1.0, 1.0, 1.0, 1.0, vec![1.0, 1.0], false);
        assert!(err.is_err());
    }

    #[test]
    fn geometry_rejects_bad_inputs() {
        assert!(Geometry::new(0.0, 1.0, 1.0, 2.0, 1).is_err());
        assert!(Geometry::new(1.0, 1.0, 1.0, 0.0, 1).is_err());
        assert!(Geometry::new(1.0, 1.0, 1.0, 2.0, 0).is_err());
    }

    #[test]
    fn taps_exceeding_subcarriers_rejected_at_generation() {
        let geom = Geometry::new(20.0, 6.0, 16.0, 2.0, 11).unwrap();
        let params = SystemParams::equal_power(4, 1.0, 1.0, 4.0, 4.0, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            generate_channel(&geom, &params, &mut rng),
            Err(Error::InvalidTapProfile { taps: 11, n: 4 })
        ));
    }

    #[test]
    fn collinear_position_arithmetic() {
        let geom = Geometry::new(20.0, 6.0, 16.0, 2.0, 11).unwrap();
        let moved = geom.with_position_ratio(0.375).unwrap();
        assert_relative_eq!(moved.d_sr(), 60.0 / 11.0, max_relative = 1e-12);
        assert_relative_eq!(moved.d_rd(), 160.0 / 11.0, max_relative = 1e-12);
        assert_relative_eq!(moved.d_sr() + moved.d_rd(), 20.0, max_relative = 1e-12);
    }

    #[test]
    fn relay_output_power_meets_the_budget_under_any_unitary() {
        // expected output power sum_k d_r^2 sum_m |W_km|^2 (d_sm^2 |h_1m|^2 + sigma_r^2)
        // equals P_r exactly; unitarity removes W from the sum
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let geom = Geometry::new(20.0, 6.0, 16.0, 2.0, 4).unwrap();
        let params = SystemParams::equal_power(8, 1.0, 1.0, 80.0, 37.0, false).unwrap();
        for _ in 0..1000 {
            let chan = generate_channel(&geom, &params, &mut rng).unwrap();
            let d_r = derive_relay_gain(&params, &chan.h1);
            let w = crate::unitary::haar_random(8, &mut rng);
            let mut power = 0.0;
            for k in 0..8 {
                for m in 0..8 {
                    power += d_r
                        * d_r
                        * w.as_matrix()[(k, m)].norm_sqr()
                        * (params.d_s()[m] * params.d_s()[m] * chan.h1[m].norm_sqr()
                            + params.sigma_r2());
                }
            }
            assert_relative_eq!(power, params.p_r(), max_relative = 1e-9);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn parseval_holds_for_arbitrary_tap_profiles(
                raw in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..=12),
                extra in 0usize..8,
            ) {
                let n = raw.len() + extra;
                let taps: Vec<Complex64> =
                    raw.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
                let h = frequency_response(&taps, n).unwrap();
                let lhs = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
                let rhs: f64 = taps.iter().map(|z| z.norm_sqr()).sum();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            }
        }
    }
}
