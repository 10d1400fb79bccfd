//! Unitary-group machinery: Haar sampling, the four-parameter 2x2
//! factorization, coordinate ascent of the achievable rate over embedded
//! 2x2 blocks, central-difference derivatives along geodesics, and the
//! determinant bound used to certify that no unitary matrix beats the best
//! permutation.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelRealization, SystemParams};
use crate::error::{Error, Result};
use crate::pairing::Permutation;
use crate::rate::{rate_general, unitarity_residual, RateKernel};

/// Unitarity residual admitted at [`UnitaryMatrix`] construction.
pub const CONSTRUCTION_TOL: f64 = 1e-10;

/// A square complex matrix validated to satisfy `W W^H = I` at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    m: DMatrix<Complex64>,
}

impl UnitaryMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "unitary matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let residual = unitarity_residual(&m);
        if residual > CONSTRUCTION_TOL {
            return Err(Error::NotUnitary {
                residual,
                tol: CONSTRUCTION_TOL,
            });
        }
        Ok(Self { m })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    /// Permutation matrix with `W[perm(i), i] = 1`.
    pub fn from_permutation(perm: &Permutation) -> Self {
        let n = perm.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &j) in perm.map().iter().enumerate() {
            m[(j, i)] = Complex64::new(1.0, 0.0);
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }
}

/// Haar-distributed random unitary: QR of an i.i.d. complex Gaussian matrix
/// with column phases fixed so the triangular factor has positive real
/// diagonal.
pub fn haar_random(n: usize, rng: &mut impl Rng) -> UnitaryMatrix {
    assert!(n >= 1, "dimension must be at least 1");
    let scale = 0.5f64.sqrt();
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal) * scale,
            rng.sample::<f64, _>(StandardNormal) * scale,
        )
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..n {
        let rkk = r[(k, k)];
        let norm = rkk.norm();
        let lambda = if norm > 0.0 {
            rkk / norm
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..n {
            q[(row, k)] *= lambda;
        }
    }
    UnitaryMatrix::new(q).expect("phase-corrected QR factor is unitary")
}

/// The four-parameter 2x2 factorization
/// `diag(e^{i phi1}, e^{i phi2}) * [[cos t, -sin t], [sin t, cos t]] * diag(1, e^{i phi3})`.
pub fn unitary_2x2(theta: f64, phi1: f64, phi2: f64, phi3: f64) -> UnitaryMatrix {
    let (s, c) = theta.sin_cos();
    let e1 = Complex64::new(phi1.cos(), phi1.sin());
    let e2 = Complex64::new(phi2.cos(), phi2.sin());
    let e3 = Complex64::new(phi3.cos(), phi3.sin());
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[e1 * c, -e1 * s * e3, e2 * s, e2 * c * e3],
    );
    UnitaryMatrix::new(m).expect("factorization is unitary for all angles")
}

/// Outcome of a coordinate-ascent run: the final matrix, its rate, and the
/// rate recorded after each sweep (first entry is the starting rate).
#[derive(Debug, Clone)]
pub struct AscentResult {
    pub w: UnitaryMatrix,
    pub rate: f64,
    pub sweep_rates: Vec<f64>,
}

/// Candidate evaluator for one embedded 2x2 block: keeps the Gram matrix
/// `K = W^H diag(u2sq) W` updated incrementally so each `(theta, phi)`
/// candidate costs `O(N)` updates plus one small Cholesky.
struct BlockSearch<'a> {
    kernel: &'a RateKernel,
    k: DMatrix<Complex64>,
    k_scratch: DMatrix<Complex64>,
    g_scratch: DMatrix<Complex64>,
    i: usize,
    j: usize,
}

impl<'a> BlockSearch<'a> {
    fn new(kernel: &'a RateKernel, k: DMatrix<Complex64>) -> Self {
        let n = kernel.dim();
        Self {
            kernel,
            k,
            k_scratch: DMatrix::zeros(n, n),
            g_scratch: DMatrix::zeros(n, n),
            i: 0,
            j: 1,
        }
    }

    fn set_block(&mut self, i: usize, j: usize) {
        self.i = i;
        self.j = j;
    }

    /// `K' = G^H K G` for the embedded block, written into `k_scratch`.
    fn conjugated_gram(&mut self, theta: f64, phi: f64) {
        let (i, j) = (self.i, self.j);
        let n = self.kernel.dim();
        let (s, c) = theta.sin_cos();
        let e = Complex64::new(phi.cos(), phi.sin());
        self.k_scratch.copy_from(&self.k);
        // column mix: col_i' = e c col_i + s col_j ; col_j' = -e s col_i + c col_j
        for m in 0..n {
            let ki = self.k_scratch[(m, i)];
            let kj = self.k_scratch[(m, j)];
            self.k_scratch[(m, i)] = ki * (e * c) + kj * s;
            self.k_scratch[(m, j)] = kj * c - ki * (e * s);
        }
        // row mix with conjugated coefficients
        for m in 0..n {
            let ki = self.k_scratch[(i, m)];
            let kj = self.k_scratch[(j, m)];
            self.k_scratch[(i, m)] = ki * (e.conj() * c) + kj * s;
            self.k_scratch[(j, m)] = kj * c - ki * (e.conj() * s);
        }
    }

    fn rate_at(&mut self, theta: f64, phi: f64) -> f64 {
        self.conjugated_gram(theta, phi);
        self.kernel.rate_from_gram(&self.k_scratch, &mut self.g_scratch)
    }

    /// Commits the block rotation into the persistent Gram matrix.
    fn apply(&mut self, theta: f64, phi: f64) {
        self.conjugated_gram(theta, phi);
        self.k.copy_from(&self.k_scratch);
    }
}

/// Golden-section maximization of a slice; callers keep the result only
/// when it beats their incumbent.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

const GRID_THETA: usize = 64;
const GRID_PHI: usize = 64;
const REFINE_ITERS: usize = 20;

/// Coordinate ascent of the achievable rate over the unitary group.
///
/// Sweeps all index pairs `(i, j)`; for each, right-multiplies by an
/// embedded 2x2 block `diag(e^{i phi}, 1) * [[cos t, -sin t], [sin t, cos t]]`
/// whose `(theta, phi)` parameters are chosen by a 64x64 grid search
/// followed by golden-section refinement on each axis. Of the four block
/// angles only a rotation and one interior phase matter here: the block's
/// right diagonal phase and a global phase are outer diagonal factors of
/// `W G`, which leave the rate invariant. Terminates when a full sweep improves the rate by less than `tol`
/// or after `max_sweeps` sweeps. The recorded rate sequence is
/// nondecreasing.
///
/// Permutation matrices (including the identity) are stationary points of
/// this objective, so ascent started exactly at one will not move; use Haar
/// restarts to explore.
pub fn ascend_rate(
    params: &SystemParams,
    channel: &ChannelRealization,
    start: &UnitaryMatrix,
    max_sweeps: usize,
    tol: f64,
) -> Result<AscentResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tol must be positive ({tol})")));
    }
    let kernel = RateKernel::new(params, channel)?;
    let n = kernel.dim();
    if start.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "start matrix is {}x{}, expected {}x{}",
            start.dim(),
            start.dim(),
            n,
            n
        )));
    }
    let mut w = start.as_matrix().clone();
    let mut search = BlockSearch::new(&kernel, kernel.gram_of(&w));
    let mut current = {
        let mut scratch = DMatrix::zeros(n, n);
        kernel.rate_from_gram(&search.k, &mut scratch)
    };
    let mut sweep_rates = vec![current];

    let theta_step = std::f64::consts::PI / GRID_THETA as f64;
    let phi_step = 2.0 * std::f64::consts::PI / GRID_PHI as f64;

    for _ in 0..max_sweeps {
        let before = current;
        for i in 0..n {
            for j in (i + 1)..n {
                search.set_block(i, j);
                // grid stage
                let mut best = (0.0f64, 0.0f64, current);
                for a in 0..GRID_THETA {
                    let theta = a as f64 * theta_step;
                    for b in 0..GRID_PHI {
                        let phi = b as f64 * phi_step;
                        let r = search.rate_at(theta, phi);
                        if r > best.2 {
                            best = (theta, phi, r);
                        }
                    }
                }
                let (mut theta, mut phi, mut rate) = best;
                // refine each axis around the winning grid cell
                let (t, rt) = golden_max(
                    |x| search.rate_at(x, phi),
                    theta - theta_step,
                    theta + theta_step,
                    REFINE_ITERS,
                );
                if rt > rate {
                    theta = t;
                    rate = rt;
                }
                let (p, rp) = golden_max(
                    |x| search.rate_at(theta, x),
                    phi - phi_step,
                    phi + phi_step,
                    REFINE_ITERS,
                );
                if rp > rate {
                    phi = p;
                    rate = rp;
                }
                if rate > current {
                    search.apply(theta, phi);
                    apply_block_right(&mut w, i, j, theta, phi);
                    current = rate;
                }
            }
        }
        sweep_rates.push(current);
        if current - before < tol {
            break;
        }
    }

    let w = UnitaryMatrix::new(w)?;
    let rate = rate_general(w.as_matrix(), params, channel)?;
    Ok(AscentResult {
        w,
        rate,
        sweep_rates,
    })
}

/// `W <- W G` for the embedded block `[[e c, -e s], [s, c]]` on columns
/// `(i, j)`.
fn apply_block_right(w: &mut DMatrix<Complex64>, i: usize, j: usize, theta: f64, phi: f64) {
    let (s, c) = theta.sin_cos();
    let e = Complex64::new(phi.cos(), phi.sin());
    for row in 0..w.nrows() {
        let wi = w[(row, i)];
        let wj = w[(row, j)];
        w[(row, i)] = wi * (e * c) + wj * s;
        w[(row, j)] = wj * c - wi * (e * s);
    }
}

/// Central-difference derivative of the rate along the geodesic
/// `t -> W exp(t S)` for a skew-Hermitian direction `S`, evaluated at the
/// given step `eps`. The matrix exponential goes through the unitary
/// eigendecomposition of `iS`, so the probes are exactly unitary.
pub fn directional_derivative(
    w: &UnitaryMatrix,
    s: &DMatrix<Complex64>,
    params: &SystemParams,
    channel: &ChannelRealization,
    eps: f64,
) -> Result<f64> {
    assert!(
        eps > 0.0 && eps <= 1e-2,
        "step must lie in (0, 1e-2], got {eps}"
    );
    let n = w.dim();
    if s.nrows() != n || s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "direction is {}x{}, expected {}x{}",
            s.nrows(),
            s.ncols(),
            n,
            n
        )));
    }
    let mut skew_residual = 0.0f64;
    let mut norm = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            skew_residual += (s[(i, j)] + s[(j, i)].conj()).norm_sqr();
            norm += s[(i, j)].norm_sqr();
        }
    }
    let skew_residual = skew_residual.sqrt();
    let norm = norm.sqrt();
    if skew_residual > 1e-10 * norm.max(1.0) {
        return Err(Error::NotSkewHermitian {
            residual: skew_residual,
        });
    }
    if norm == 0.0 {
        return Ok(0.0);
    }

    // iS is Hermitian; exp(t S) = V diag(e^{-i t lambda}) V^H
    let i_unit = Complex64::new(0.0, 1.0);
    let h = s.map(|z| z * i_unit);
    let eig = SymmetricEigen::new(h);
    let v = &eig.eigenvectors;
    let probe = |step: f64| -> Result<f64> {
        let mut d = DMatrix::zeros(n, n);
        for k in 0..n {
            let ang = -step * eig.eigenvalues[k];
            d[(k, k)] = Complex64::new(ang.cos(), ang.sin());
        }
        let exp = v * d * v.adjoint();
        rate_general(&(w.as_matrix() * exp), params, channel)
    };
    let forward = probe(eps)?;
    let backward = probe(-eps)?;
    Ok((forward - backward) / (2.0 * eps))
}

/// Hermitian positive-semidefinite matrix of the form `(P W Q)^H (P W Q)`,
/// validated at construction.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    a: DMatrix<Complex64>,
}

impl GramMatrix {
    pub fn new(a: DMatrix<Complex64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "Gram matrix must be square and nonempty, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut max_abs = 0.0f64;
        let mut herm_residual = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                max_abs = max_abs.max(a[(i, j)].norm());
                herm_residual = herm_residual.max((a[(i, j)] - a[(j, i)].conj()).norm());
            }
        }
        if herm_residual > 1e-12 * max_abs.max(1.0) {
            return Err(Error::NotPsd {
                reason: format!("Hermitian residual {herm_residual:.3e}"),
            });
        }
        let eig = SymmetricEigen::new(a.clone());
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_eig = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if min_eig < -1e-10 * max_eig.max(1.0) {
            return Err(Error::NotPsd {
                reason: format!("minimum eigenvalue {min_eig:.3e}"),
            });
        }
        Ok(Self { a })
    }

    /// `A = (P W Q)^H (P W Q)` for diagonal `P`, `Q` given by their
    /// diagonals.
    pub fn from_factors(
        p_diag: &[Complex64],
        w: &UnitaryMatrix,
        q_diag: &[Complex64],
    ) -> Result<Self> {
        let n = w.dim();
        if p_diag.len() != n || q_diag.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "diagonal lengths {} and {} do not match dimension {}",
                p_diag.len(),
                q_diag.len(),
                n
            )));
        }
        let mut m = w.as_matrix().clone();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = p_diag[i] * m[(i, j)] * q_diag[j];
            }
        }
        Self::new(m.adjoint() * m)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.a
    }
}

/// Determinant of a Hermitian positive-definite matrix via in-place
/// Cholesky (product of pivots).
fn det_hpd(g: &mut DMatrix<Complex64>) -> Option<f64> {
    let n = g.nrows();
    let mut det = 1.0f64;
    for k in 0..n {
        let mut d = g[(k, k)].re;
        for m in 0..k {
            d -= g[(k, m)].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        det *= d;
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
    Some(det)
}

/// Checks the positive-semidefinite determinant bound
/// `det(I_n + A) <= (1 + A_nn) det(I_{n-1} + A_{n-1})`
/// up to a `1e-12`-scaled slack, where `A_{n-1}` is the leading principal
/// submatrix. Diagonal matrices achieve equality.
pub fn psd_det_bound_check(a: &GramMatrix) -> bool {
    let n = a.dim();
    let mut full = DMatrix::identity(n, n) + a.as_matrix();
    let det_n = match det_hpd(&mut full) {
        Some(d) => d,
        None => return false,
    };
    let det_minor = if n == 1 {
        1.0
    } else {
        let sub = a.as_matrix().view((0, 0), (n - 1, n - 1)).into_owned();
        let mut minor = DMatrix::identity(n - 1, n - 1) + sub;
        match det_hpd(&mut minor) {
            Some(d) => d,
            None => return false,
        }
    };
    let a_nn = a.as_matrix()[(n - 1, n - 1)].re;
    det_n <= (1.0 + a_nn) * det_minor + 1e-12 * det_n.max(1.0)
}
