//! Monte-Carlo harness: four-scheme rate comparison versus SNR and versus
//! relay position, with deterministic substream seeding so results are
//! byte-identical regardless of worker count.
//!
//! All schemes of a trial share one channel realization (common random
//! numbers), which sharpens the comparison without biasing any scheme.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    derive_relay_gain, generate_channel, pairing_metrics, ChannelRealization, Geometry,
    SystemParams,
};
use crate::error::{Error, Result};
use crate::pairing::{sorted_pairing, Permutation};
use crate::rate::{rate_general, rate_pairing};
use crate::unitary::haar_random;

/// Relay processing schemes under comparison. The derived order matches the
/// alphabetical order of the scheme names, which fixes CSV row order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Identity processing (each subcarrier forwarded in place).
    NoSp,
    /// Rate-optimal sorted subcarrier pairing.
    OptimalSp,
    /// A Haar-random unitary processing matrix.
    RandomUnitary,
    /// Sorted pairing computed from the relay links only, evaluated with
    /// maximum ratio combining of the direct path.
    SpIgnoreDirect,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::NoSp,
        Scheme::OptimalSp,
        Scheme::RandomUnitary,
        Scheme::SpIgnoreDirect,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::NoSp => "no_sp",
            Scheme::OptimalSp => "optimal_sp",
            Scheme::RandomUnitary => "random_unitary",
            Scheme::SpIgnoreDirect => "sp_ignore_direct",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_sp" => Ok(Scheme::NoSp),
            "optimal_sp" => Ok(Scheme::OptimalSp),
            "random_unitary" => Ok(Scheme::RandomUnitary),
            "sp_ignore_direct" => Ok(Scheme::SpIgnoreDirect),
            other => Err(Error::InvalidParams(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Scenario description for one experiment: geometry, sweep axes, trial
/// count and seeding.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub geometry: Geometry,
    pub n_subcarriers: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub snr_db_list: Vec<f64>,
    pub position_ratio_list: Vec<f64>,
    pub snr_db_fixed: f64,
    pub schemes: Vec<Scheme>,
    pub direct_path: bool,
}

impl ScenarioConfig {
    /// Default scenario: 128 subcarriers, 11 taps per link, source and
    /// destination 20 m apart with the relay at 6 m / 16 m, pathloss
    /// exponent 2, 500 trials, SNR swept 0-20 dB in 2 dB steps, position
    /// sweep at 14 dB.
    pub fn standard() -> Self {
        Self {
            geometry: Geometry::new(20.0, 6.0, 16.0, 2.0, 11).expect("valid default geometry"),
            n_subcarriers: 128,
            trials: 500,
            master_seed: 0x52454c41594c4142, // "RELAYLAB"
            snr_db_list: (0..=10).map(|k| (2 * k) as f64).collect(),
            position_ratio_list: vec![0.25, 0.5, 1.0, 2.0, 4.0, 9.0],
            snr_db_fixed: 14.0,
            schemes: Scheme::ALL.to_vec(),
            direct_path: true,
        }
    }

    fn validate_common(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be >= 1".into()));
        }
        if self.n_subcarriers == 0 {
            return Err(Error::InvalidParams("n_subcarriers must be >= 1".into()));
        }
        if self.geometry.taps_per_link() > self.n_subcarriers {
            return Err(Error::InvalidTapProfile {
                taps: self.geometry.taps_per_link(),
                n: self.n_subcarriers,
            });
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidParams("schemes must be non-empty".into()));
        }
        Ok(())
    }

    /// Schemes deduplicated and in name order.
    fn ordered_schemes(&self) -> Vec<Scheme> {
        let mut s = self.schemes.clone();
        s.sort();
        s.dedup();
        s
    }
}

/// One aggregated measurement: a sweep point, a scheme, and the sample mean
/// and standard error of the per-subcarrier rate over `trials` channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub mean_rate_per_subcarrier: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Result of a sweep, ordered by `(sweep_value, scheme name)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Mean rate for a given sweep value and scheme, when present.
    pub fn mean_at(&self, sweep_value: f64, scheme: Scheme) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.scheme == scheme)
            .map(|r| r.mean_rate_per_subcarrier)
    }
}

/// Mixes `(master seed, sweep lane, trial)` into an independent substream
/// seed. SplitMix64-style finalization on each component keeps distinct
/// coordinates from colliding.
pub fn substream_seed(master: u64, lane: u64, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(master ^ mix(lane ^ mix(trial)))
}

/// System parameters for a target average per-subcarrier direct-path SNR
/// (in dB), with unit noise variances, `P_r = P_s` and equal subcarrier
/// power allocation.
pub fn power_from_snr(snr_db: f64, geometry: &Geometry, n: usize) -> SystemParams {
    let snr = 10.0f64.powf(snr_db / 10.0);
    let p_s = snr * n as f64 * geometry.d_sd().powf(geometry.pathloss_exp());
    SystemParams::equal_power(n, 1.0, 1.0, p_s, p_s, true)
        .expect("derived powers are positive")
}

/// Total rate of each scheme on one channel realization. The random-unitary
/// scheme draws its matrix from `rng`; all other schemes are deterministic
/// in the channel.
pub fn evaluate_schemes(
    params: &SystemParams,
    channel: &ChannelRealization,
    rng: &mut impl Rng,
) -> BTreeMap<Scheme, f64> {
    let n = params.n_subcarriers();
    let direct = params.direct_path();
    let d_r = derive_relay_gain(params, &channel.h1);
    let metrics = pairing_metrics(params, channel, d_r);

    let mut rates = BTreeMap::new();
    let optimal = sorted_pairing(&metrics, direct);
    rates.insert(
        Scheme::OptimalSp,
        rate_pairing(&optimal, &metrics, direct)
            .expect("metrics and permutation agree")
            .total_bits,
    );
    rates.insert(
        Scheme::NoSp,
        rate_pairing(&Permutation::identity(n), &metrics, direct)
            .expect("metrics and permutation agree")
            .total_bits,
    );
    let w = haar_random(n, rng);
    rates.insert(
        Scheme::RandomUnitary,
        rate_general(w.as_matrix(), params, channel).expect("Haar sample is unitary"),
    );
    let relay_only = sorted_pairing(&metrics, false);
    rates.insert(
        Scheme::SpIgnoreDirect,
        rate_pairing(&relay_only, &metrics, direct)
            .expect("metrics and permutation agree")
            .total_bits,
    );
    rates
}

/// Deterministic pairwise summation in index order.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error (`sample std / sqrt(trials)`, zero for a
/// single trial).
fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs the trials of one sweep point and aggregates per-scheme rows.
fn run_sweep_point(
    config: &ScenarioConfig,
    geometry: &Geometry,
    params: &SystemParams,
    lane: u64,
    sweep_value: f64,
    rows: &mut Vec<SweepRow>,
) -> Result<()> {
    let n = config.n_subcarriers;
    let per_trial: Vec<BTreeMap<Scheme, f64>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = substream_seed(config.master_seed, lane, t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let channel = generate_channel(geometry, params, &mut rng)?;
            Ok(evaluate_schemes(params, &channel, &mut rng))
        })
        .collect::<Result<Vec<_>>>()?;
    for scheme in config.ordered_schemes() {
        let values: Vec<f64> = per_trial
            .iter()
            .map(|rates| rates[&scheme] / n as f64)
            .collect();
        let (mean, std_error) = mean_and_std_error(&values);
        rows.push(SweepRow {
            sweep_value,
            scheme,
            mean_rate_per_subcarrier: mean,
            std_error,
            trials: config.trials,
        });
    }
    Ok(())
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        a.sweep_value
            .partial_cmp(&b.sweep_value)
            .expect("sweep values must not be NaN")
            .then(a.scheme.cmp(&b.scheme))
    });
}

/// Rate-versus-SNR sweep over `snr_db_list` at the configured geometry.
pub fn run_snr_sweep(config: &ScenarioConfig) -> Result<SweepResult> {
    config.validate_common()?;
    if config.snr_db_list.is_empty() {
        return Err(Error::InvalidParams("snr_db_list must be non-empty".into()));
    }
    let mut rows = Vec::new();
    for (si, &snr_db) in config.snr_db_list.iter().enumerate() {
        let params = power_from_snr(snr_db, &config.geometry, config.n_subcarriers)
            .with_direct_path(config.direct_path);
        run_sweep_point(config, &config.geometry, &params, si as u64, snr_db, &mut rows)?;
    }
    sort_rows(&mut rows);
    Ok(SweepResult { rows })
}

/// Rate-versus-relay-position sweep at `snr_db_fixed`: for each ratio
/// `r = d_sr/d_rd` the relay is placed on the source-destination line with
/// `d_sr + d_rd = d_sd`.
pub fn run_position_sweep(config: &ScenarioConfig) -> Result<SweepResult> {
    config.validate_common()?;
    if config.position_ratio_list.is_empty() {
        return Err(Error::InvalidParams(
            "position_ratio_list must be non-empty".into(),
        ));
    }
    if !config.snr_db_fixed.is_finite() {
        return Err(Error::InvalidParams("snr_db_fixed must be finite".into()));
    }
    let mut rows = Vec::new();
    for (ri, &ratio) in config.position_ratio_list.iter().enumerate() {
        let geometry = config.geometry.with_position_ratio(ratio)?;
        let params = power_from_snr(config.snr_db_fixed, &geometry, config.n_subcarriers)
            .with_direct_path(config.direct_path);
        run_sweep_point(config, &geometry, &params, ri as u64, ratio, &mut rows)?;
    }
    sort_rows(&mut rows);
    Ok(SweepResult { rows })
}
