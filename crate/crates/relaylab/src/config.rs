//! JSON configuration files for the command line.
//!
//! A config mirrors [`ScenarioConfig`](crate::experiments::ScenarioConfig)
//! plus an optional output path and per-command knobs. Unknown keys are
//! rejected and every field except `schema_version` has a documented
//! default. Fixed scenarios (explicit powers and channel gains) can be
//! supplied through `params_override` / `channel_override`, which the
//! `pair` command uses instead of drawing a random channel.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::channel::{ChannelRealization, Geometry, SystemParams};
use crate::error::{Error, Result};
use crate::experiments::{ScenarioConfig, Scheme};

/// Config format version accepted by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub d_sd: f64,
    pub d_sr: f64,
    pub d_rd: f64,
    #[serde(default = "defaults::pathloss_exp")]
    pub pathloss_exp: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            d_sd: 20.0,
            d_sr: 6.0,
            d_rd: 16.0,
            pathloss_exp: 2.0,
        }
    }
}

/// Explicit system parameters replacing the SNR-derived ones.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsOverride {
    pub p_s: f64,
    pub p_r: f64,
    #[serde(default = "defaults::unit")]
    pub sigma_r2: f64,
    #[serde(default = "defaults::unit")]
    pub sigma_d2: f64,
    /// Per-subcarrier power coefficients; omitted means equal allocation.
    #[serde(default)]
    pub d_s: Option<Vec<f64>>,
}

/// Explicit channel gains as `[re, im]` pairs. `h0` may be omitted (no
/// direct-path gains).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelOverride {
    #[serde(default)]
    pub h0: Option<Vec<[f64; 2]>>,
    pub h1: Vec<[f64; 2]>,
    pub h2: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    /// Must equal [`SCHEMA_VERSION`].
    pub schema_version: u32,
    /// Number of OFDM subcarriers. Default 128.
    #[serde(default = "defaults::n_subcarriers")]
    pub n_subcarriers: usize,
    /// Channel taps per link. Default 11.
    #[serde(default = "defaults::taps_per_link")]
    pub taps_per_link: usize,
    /// Monte-Carlo trials per sweep point. Default 500.
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    /// Master seed for substream derivation. Default 1.
    #[serde(default = "defaults::master_seed")]
    pub master_seed: u64,
    /// Whether the destination also hears the source directly. Default true.
    #[serde(default = "defaults::direct_path")]
    pub direct_path: bool,
    /// Node distances and pathloss exponent. Default 20 m / 6 m / 16 m,
    /// exponent 2.
    #[serde(default)]
    pub geometry: GeometryConfig,
    /// SNR sweep axis in dB. Default 0..=20 in 2 dB steps.
    #[serde(default = "defaults::snr_db_list")]
    pub snr_db_list: Vec<f64>,
    /// Position sweep axis (ratios `d_sr/d_rd`). Default
    /// `[0.25, 0.5, 1, 2, 4, 9]`.
    #[serde(default = "defaults::position_ratio_list")]
    pub position_ratio_list: Vec<f64>,
    /// Operating SNR in dB for the position sweep and for `pair`.
    /// Default 14.
    #[serde(default = "defaults::snr_db_fixed")]
    pub snr_db_fixed: f64,
    /// Schemes to report. Default all four.
    #[serde(default = "defaults::schemes")]
    pub schemes: Vec<Scheme>,
    /// Output path; `--out` takes precedence when both are given.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Size cap for the exhaustive pairing oracle. Default 9.
    #[serde(default = "defaults::oracle_limit")]
    pub oracle_limit: usize,
    /// Haar restarts for ascent verification. Default 8.
    #[serde(default = "defaults::restarts")]
    pub restarts: usize,
    /// Sweep-improvement threshold that stops the ascent. Default 1e-7.
    #[serde(default = "defaults::ascent_tol")]
    pub ascent_tol: f64,
    /// Maximum ascent sweeps. Default 40.
    #[serde(default = "defaults::max_sweeps")]
    pub max_sweeps: usize,
    /// Fixed system parameters for `pair` (otherwise derived from
    /// `snr_db_fixed`).
    #[serde(default)]
    pub params_override: Option<ParamsOverride>,
    /// Fixed channel gains for `pair` (otherwise drawn from `master_seed`).
    #[serde(default)]
    pub channel_override: Option<ChannelOverride>,
}

mod defaults {
    use crate::experiments::Scheme;

    pub fn n_subcarriers() -> usize {
        128
    }
    pub fn taps_per_link() -> usize {
        11
    }
    pub fn trials() -> usize {
        500
    }
    pub fn master_seed() -> u64 {
        1
    }
    pub fn direct_path() -> bool {
        true
    }
    pub fn pathloss_exp() -> f64 {
        2.0
    }
    pub fn unit() -> f64 {
        1.0
    }
    pub fn snr_db_list() -> Vec<f64> {
        (0..=10).map(|k| (2 * k) as f64).collect()
    }
    pub fn position_ratio_list() -> Vec<f64> {
        vec![0.25, 0.5, 1.0, 2.0, 4.0, 9.0]
    }
    pub fn snr_db_fixed() -> f64 {
        14.0
    }
    pub fn schemes() -> Vec<Scheme> {
        Scheme::ALL.to_vec()
    }
    pub fn oracle_limit() -> usize {
        crate::pairing::DEFAULT_ENUMERATION_LIMIT
    }
    pub fn restarts() -> usize {
        8
    }
    pub fn ascent_tol() -> f64 {
        1e-7
    }
    pub fn max_sweeps() -> usize {
        40
    }
}

impl CliConfig {
    /// Parses and validates a config file. Parse failures carry the JSON
    /// line/column.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: CliConfig = serde_json::from_str(text).map_err(|e| {
            Error::Format(format!(
                "config parse error at line {}, column {}: {}",
                e.line(),
                e.column(),
                e
            ))
        })?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema_version {} (this build reads version {})",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        if self.n_subcarriers == 0 {
            return Err(Error::InvalidParams("n_subcarriers must be >= 1".into()));
        }
        self.geometry()?;
        if let Some(chan) = &self.channel_override {
            if chan.h1.len() != self.n_subcarriers || chan.h2.len() != self.n_subcarriers {
                return Err(Error::InvalidParams(format!(
                    "channel_override gain vectors must have n_subcarriers = {} entries",
                    self.n_subcarriers
                )));
            }
            if let Some(h0) = &chan.h0 {
                if h0.len() != self.n_subcarriers {
                    return Err(Error::InvalidParams(format!(
                        "channel_override.h0 must have n_subcarriers = {} entries",
                        self.n_subcarriers
                    )));
                }
            }
        }
        if let Some(p) = &self.params_override {
            if let Some(d_s) = &p.d_s {
                if d_s.len() != self.n_subcarriers {
                    return Err(Error::InvalidParams(format!(
                        "params_override.d_s must have n_subcarriers = {} entries",
                        self.n_subcarriers
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(
            self.geometry.d_sd,
            self.geometry.d_sr,
            self.geometry.d_rd,
            self.geometry.pathloss_exp,
            self.taps_per_link,
        )
    }

    pub fn to_scenario(&self) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            geometry: self.geometry()?,
            n_subcarriers: self.n_subcarriers,
            trials: self.trials,
            master_seed: self.master_seed,
            snr_db_list: self.snr_db_list.clone(),
            position_ratio_list: self.position_ratio_list.clone(),
            snr_db_fixed: self.snr_db_fixed,
            schemes: self.schemes.clone(),
            direct_path: self.direct_path,
        })
    }

    /// System parameters for single-channel commands, honoring
    /// `params_override`.
    pub fn system_params(&self, direct: bool) -> Result<SystemParams> {
        match &self.params_override {
            Some(o) => {
                let d_s = match &o.d_s {
                    Some(v) => v.clone(),
                    None => {
                        let d = (o.p_s / self.n_subcarriers as f64).sqrt();
                        vec![d; self.n_subcarriers]
                    }
                };
                SystemParams::new(
                    self.n_subcarriers,
                    o.sigma_r2,
                    o.sigma_d2,
                    o.p_s,
                    o.p_r,
                    d_s,
                    direct,
                )
            }
            None => Ok(crate::experiments::power_from_snr(
                self.snr_db_fixed,
                &self.geometry()?,
                self.n_subcarriers,
            )
            .with_direct_path(direct)),
        }
    }

    /// Explicit channel gains, when configured.
    pub fn channel(&self) -> Result<Option<ChannelRealization>> {
        let Some(o) = &self.channel_override else {
            return Ok(None);
        };
        let convert = |v: &Vec<[f64; 2]>| -> Vec<Complex64> {
            v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
        };
        let h0 = match &o.h0 {
            Some(v) => convert(v),
            None => vec![Complex64::new(0.0, 0.0); self.n_subcarriers],
        };
        Ok(Some(ChannelRealization::new(
            h0,
            convert(&o.h1),
            convert(&o.h2),
        )?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_documented_defaults() {
        let config = CliConfig::from_json(r#"{ "schema_version": 1 }"#).unwrap();
        assert_eq!(config.n_subcarriers, 128);
        assert_eq!(config.taps_per_link, 11);
        assert_eq!(config.trials, 500);
        assert_eq!(config.snr_db_list.len(), 11);
        assert_eq!(config.schemes.len(), 4);
        assert!(config.direct_path);
        assert_eq!(config.snr_db_fixed, 14.0);
        let scenario = config.to_scenario().unwrap();
        assert_eq!(scenario.geometry.d_sd(), 20.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = CliConfig::from_json(r#"{ "schema_version": 1, "bogus": 3 }"#);
        assert!(matches!(err, Err(Error::Format(_))));
    }

    #[test]
    fn schema_version_is_checked() {
        let err = CliConfig::from_json(r#"{ "schema_version": 99 }"#);
        assert!(matches!(err, Err(Error::Format(_))));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = CliConfig::from_json("{ not json");
        match err {
            Err(Error::Format(msg)) => assert!(msg.contains("line 1")),
            other => panic!("expected Format error, got {other:?}"),
        }
    }

    #[test]
    fn explicit_scenario_round_trips() {
        let text = r#"{
            "schema_version": 1,
            "n_subcarriers": 2,
            "taps_per_link": 1,
            "direct_path": false,
            "params_override": {
                "p_s": 2.0, "p_r": 7.0, "sigma_r2": 1.0, "sigma_d2": 1.0,
                "d_s": [1.0, 1.0]
            },
            "channel_override": {
                "h1": [[2, 0], [1, 0]],
                "h2": [[1, 0], [3, 0]]
            }
        }"#;
        let config = CliConfig::from_json(text).unwrap();
        let params = config.system_params(false).unwrap();
        assert_eq!(params.p_r(), 7.0);
        let chan = config.channel().unwrap().unwrap();
        assert_eq!(chan.h1[0].re, 2.0);
        assert!(chan.h0.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn override_length_mismatch_is_rejected() {
        let text = r#"{
            "schema_version": 1,
            "n_subcarriers": 4,
            "channel_override": { "h1": [[1, 0]], "h2": [[1, 0]] }
        }"#;
        assert!(CliConfig::from_json(text).is_err());
    }
}
