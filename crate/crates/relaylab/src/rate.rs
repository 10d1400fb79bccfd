//! End-to-end achievable rate, both as the general log-det form for an
//! arbitrary unitary processing matrix and as the fast closed form for
//! permutation (subcarrier pairing) processing.
//!
//! With diagonal link matrices the two-phase system collapses to
//! `C(W) = 1/2 log2 det(I + (Y2 W Y1)^H (Y2 W Y1) + Y0^H Y0)` where
//! `Y2 = R_n^{-1/2} H_2 D_r`, `Y1 = H_1 D_s`, `Y0 = H_0 D_s / sigma_d`
//! and `R_n = sigma_r^2 H_2 D_r^2 H_2^H + sigma_d^2 I`. The determinant is
//! evaluated through a Cholesky factorization of the Hermitian
//! positive-definite argument. Rates are bits per two-phase channel use,
//! summed over subcarriers; the half-duplex factor 1/2 is always included.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{ChannelRealization, PairingMetrics, SystemParams};
use crate::error::{Error, Result};
use crate::pairing::Permutation;

/// Unitarity tolerance accepted by [`rate_general`]; loose enough for the
/// rounding accumulated by iterative ascent, tight enough to keep the relay
/// power constraint meaningful.
pub const UNITARITY_TOL: f64 = 1e-8;

/// Frobenius-norm residual `||W W^H - I||_F`.
pub fn unitarity_residual(w: &DMatrix<Complex64>) -> f64 {
    let n = w.nrows();
    let gram = w * w.adjoint();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let expected = if i == j { 1.0 } else { 0.0 };
            acc += (gram[(i, j)] - Complex64::new(expected, 0.0)).norm_sqr();
        }
    }
    acc.sqrt()
}

/// In-place complex Cholesky of a Hermitian positive-definite matrix using
/// the lower triangle; returns `log2 det`. `None` when a pivot is
/// nonpositive.
pub(crate) fn log2_det_hpd(g: &mut DMatrix<Complex64>) -> Option<f64> {
    let n = g.nrows();
    let mut ln_det = 0.0f64;
    for k in 0..n {
        let mut d = g[(k, k)].re;
        for m in 0..k {
            d -= g[(k, m)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        ln_det += d.ln();
        let l = d.sqrt();
        g[(k, k)] = Complex64::new(l, 0.0);
        for i in (k + 1)..n {
            let mut s = g[(i, k)];
            for m in 0..k {
                s -= g[(i, m)] * g[(k, m)].conj();
            }
            g[(i, k)] = s / l;
        }
    }
    Some(ln_det / std::f64::consts::LN_2)
}

/// Precomputed per-subcarrier factors of the rate expression for one
/// `(params, channel)` pair, reused across many candidate matrices.
#[derive(Debug, Clone)]
pub(crate) struct RateKernel {
    /// Input-side complex gains `u1_i = h_1i d_si`.
    pub(crate) u1: Vec<Complex64>,
    /// Output-side power gains `|u2_j|^2 = |h_2j d_r|^2 / r_n_j` (these equal
    /// the pairing metric `p2`).
    pub(crate) u2sq: Vec<f64>,
    /// Direct-path terms `|u0_i|^2 = |h_0i d_si|^2 / sigma_d^2`; all zero
    /// when the direct path is disabled.
    pub(crate) u0sq: Vec<f64>,
}

impl RateKernel {
    pub(crate) fn new(params: &SystemParams, channel: &ChannelRealization) -> Result<Self> {
        let n = params.n_subcarriers();
        if channel.n_subcarriers() != n {
            return Err(Error::DimensionMismatch(format!(
                "channel has {} subcarriers, params expect {}",
                channel.n_subcarriers(),
                n
            )));
        }
        let d_r = crate::channel::derive_relay_gain(params, &channel.h1);
        let d_s = params.d_s();
        let mut u1 = Vec::with_capacity(n);
        let mut u2sq = Vec::with_capacity(n);
        let mut u0sq = Vec::with_capacity(n);
        for k in 0..n {
            u1.push(channel.h1[k] * d_s[k]);
            let amplified = channel.h2[k].norm_sqr() * d_r * d_r;
            u2sq.push(amplified / (params.sigma_d2() + params.sigma_r2() * amplified));
            if params.direct_path() {
                u0sq.push(channel.h0[k].norm_sqr() * d_s[k] * d_s[k] / params.sigma_d2());
            } else {
                u0sq.push(0.0);
            }
        }
        Ok(Self { u1, u2sq, u0sq })
    }

    pub(crate) fn dim(&self) -> usize {
        self.u1.len()
    }

    /// Gram matrix `K = W^H diag(u2sq) W` of a candidate processing matrix.
    pub(crate) fn gram_of(&self, w: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut scaled = w.clone();
        for j in 0..n {
            let s = self.u2sq[j].sqrt();
            for k in 0..n {
                scaled[(j, k)] *= s;
            }
        }
        scaled.adjoint() * scaled
    }

    /// Rate implied by a precomputed Gram matrix `K = W^H diag(u2sq) W`.
    pub(crate) fn rate_from_gram(&self, k: &DMatrix<Complex64>, scratch: &mut DMatrix<Complex64>) -> f64 {
        let n = self.dim();
        for col in 0..n {
            for row in 0..n {
                let mut v = self.u1[row].conj() * k[(row, col)] * self.u1[col];
                if row == col {
                    v += Complex64::new(1.0 + self.u0sq[row], 0.0);
                }
                scratch[(row, col)] = v;
            }
        }
        // positive definite by construction: I + PSD
        0.5 * log2_det_hpd(scratch).expect("rate argument must be positive definite")
    }

    pub(crate) fn rate_of(&self, w: &DMatrix<Complex64>) -> f64 {
        let n = self.dim();
        let k = self.gram_of(w);
        let mut scratch = DMatrix::zeros(n, n);
        self.rate_from_gram(&k, &mut scratch)
    }
}

/// Equivalent single-phase model of the two-phase relay channel for a given
/// processing matrix: channel matrix `H_eq = H_2 D_r W H_1 D_s`, diagonal
/// noise covariance `R_n`, and the direct-path diagonal `Y0^H Y0`.
#[derive(Debug, Clone)]
pub struct EquivalentModel {
    pub h_eq: DMatrix<Complex64>,
    pub r_n_diag: Vec<f64>,
    pub upsilon0_sq: Vec<f64>,
}

impl EquivalentModel {
    pub fn build(
        w: &DMatrix<Complex64>,
        params: &SystemParams,
        channel: &ChannelRealization,
    ) -> Result<Self> {
        let n = params.n_subcarriers();
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "processing matrix is {}x{}, expected {}x{}",
                w.nrows(),
                w.ncols(),
                n,
                n
            )));
        }
        if channel.n_subcarriers() != n {
            return Err(Error::DimensionMismatch(
                "channel and params disagree on subcarrier count".into(),
            ));
        }
        let d_r = crate::channel::derive_relay_gain(params, &channel.h1);
        let d_s = params.d_s();
        let mut h_eq = w.clone();
        for i in 0..n {
            // column scaling by H_1 D_s, row scaling by H_2 D_r
            let col = channel.h1[i] * d_s[i];
            for j in 0..n {
                h_eq[(j, i)] *= col;
            }
        }
        for j in 0..n {
            let row = channel.h2[j] * d_r;
            for i in 0..n {
                h_eq[(j, i)] *= row;
            }
        }
        let r_n_diag: Vec<f64> = (0..n)
            .map(|j| {
                params.sigma_r2() * channel.h2[j].norm_sqr() * d_r * d_r + params.sigma_d2()
            })
            .collect();
        let upsilon0_sq: Vec<f64> = (0..n)
            .map(|i| {
                if params.direct_path() {
                    channel.h0[i].norm_sqr() * d_s[i] * d_s[i] / params.sigma_d2()
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            h_eq,
            r_n_diag,
            upsilon0_sq,
        })
    }
}

/// Achievable rate of an arbitrary processing matrix, in bits per two-phase
/// channel use summed over all subcarriers.
///
/// The relay gain is derived from the relay power budget, and the
/// direct-path term enters only when `params.direct_path()` is set. Rejects
/// matrices whose unitarity residual exceeds [`UNITARITY_TOL`].
pub fn rate_general(
    w: &DMatrix<Complex64>,
    params: &SystemParams,
    channel: &ChannelRealization,
) -> Result<f64> {
    let n = params.n_subcarriers();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "processing matrix is {}x{}, expected {}x{}",
            w.nrows(),
            w.ncols(),
            n,
            n
        )));
    }
    let residual = unitarity_residual(w);
    if residual > UNITARITY_TOL {
        return Err(Error::NotUnitary {
            residual,
            tol: UNITARITY_TOL,
        });
    }
    let kernel = RateKernel::new(params, channel)?;
    Ok(kernel.rate_of(w))
}

/// One matched pair in a subcarrier pairing: input subcarrier `input` is
/// relayed on output subcarrier `output` with combined post-MRC SINR `sinr`
/// contributing `bits` to the sum rate. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRate {
    pub input: usize,
    pub output: usize,
    pub sinr: f64,
    pub bits: f64,
}

/// Sum rate of a pairing together with its per-pair decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBreakdown {
    pub total_bits: f64,
    pub per_pair: Vec<PairRate>,
}

impl RateBreakdown {
    /// Average rate per subcarrier (total divided by N).
    pub fn per_subcarrier(&self) -> f64 {
        self.total_bits / self.per_pair.len() as f64
    }
}

/// Relayed-path SINR of pairing input `i` with output `j`: `q2[i] * p2[j]`.
/// Indices are zero-based.
pub fn pair_sinr(i: usize, j: usize, metrics: &PairingMetrics) -> Result<f64> {
    let n = metrics.n_subcarriers();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    Ok(metrics.q2[i] * metrics.p2[j])
}

/// Closed-form rate of a subcarrier pairing.
///
/// Input `i` mapped to output `j = perm[i]` contributes
/// `1/2 log2(1 + snr_sd_i + q2_i p2_j)` with the direct term present only
/// when `direct` is set. Agrees with [`rate_general`] applied to the
/// permutation matrix.
pub fn rate_pairing(
    perm: &Permutation,
    metrics: &PairingMetrics,
    direct: bool,
) -> Result<RateBreakdown> {
    let n = metrics.n_subcarriers();
    if perm.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "permutation acts on {} subcarriers, metrics have {}",
            perm.len(),
            n
        )));
    }
    let mut per_pair = Vec::with_capacity(n);
    let mut total_bits = 0.0;
    for (i, &j) in perm.map().iter().enumerate() {
        let relayed = metrics.q2[i] * metrics.p2[j];
        let sinr = if direct {
            metrics.snr_sd[i] + relayed
        } else {
            relayed
        };
        let bits = 0.5 * sinr.ln_1p() / std::f64::consts::LN_2;
        total_bits += bits;
        per_pair.push(PairRate {
            input: i,
            output: j,
            sinr,
            bits,
        });
    }
    Ok(RateBreakdown {
        total_bits,
        per_pair,
    })
}
