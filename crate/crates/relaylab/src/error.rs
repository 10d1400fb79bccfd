//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by channel construction, rate evaluation and the
/// pairing / unitary optimizers.
#[derive(Debug, Error)]
pub enum Error {
    /// Tap profile is empty or longer than the number of subcarriers.
    #[error("invalid tap profile: {taps} taps for {n} subcarriers (need 1 <= taps <= n)")]
    InvalidTapProfile { taps: usize, n: usize },

    /// A matrix that must be unitary failed the `||W W^H - I||_F` check.
    #[error("matrix is not unitary: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotUnitary { residual: f64, tol: f64 },

    /// A permutation map is not a bijection on `0..n`.
    #[error("invalid permutation: {reason}")]
    InvalidPermutation { reason: String },

    /// Exhaustive enumeration was requested above the factorial guard.
    #[error("problem size {n} exceeds enumeration limit {limit}")]
    SizeLimit { n: usize, limit: usize },

    /// Subcarrier index outside `0..n`.
    #[error("subcarrier index {index} out of range for {n} subcarriers")]
    IndexOutOfRange { index: usize, n: usize },

    /// A direction matrix for geodesic differentiation is not skew-Hermitian.
    #[error("direction is not skew-Hermitian: residual {residual:.3e}")]
    NotSkewHermitian { residual: f64 },

    /// A matrix that must be Hermitian positive semidefinite is not.
    #[error("matrix is not Hermitian positive semidefinite: {reason}")]
    NotPsd { reason: String },

    /// System parameters, geometry or scenario configuration violate an invariant.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Dimension mismatch between operands.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Underlying I/O failure.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed serialized data.
    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
