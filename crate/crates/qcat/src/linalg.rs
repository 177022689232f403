//! Small dense complex linear algebra helpers shared across the crate.
//!
//! Everything here operates on Hilbert-space dimensions of at most 10, so
//! exact eigendecomposition is always the cheapest route to matrix functions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{QcatError, Result};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Maximum deviation of `m` from its own adjoint.
pub fn hermiticity_error(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues and a unitary
/// eigenvector matrix, so `h = vectors * diag(values) * vectors†`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(h: &CMat) -> Result<Self> {
        let asym = hermiticity_error(h);
        if asym > 1e-10 {
            return Err(QcatError::NotHermitian {
                max_asymmetry: asym,
            });
        }
        let se = h.clone().symmetric_eigen();
        Ok(Self {
            values: se.eigenvalues,
            vectors: se.eigenvectors,
        })
    }

    /// exp(-i h t) applied through the eigenbasis.
    pub fn unitary_at(&self, t: f64) -> CMat {
        let d = self.values.len();
        let phases = CVec::from_fn(d, |k, _| (-C64::i() * self.values[k] * t).exp());
        let mut out = CMat::zeros(d, d);
        for k in 0..d {
            let col = self.vectors.column(k);
            for i in 0..d {
                let w = col[i] * phases[k];
                for j in 0..d {
                    out[(i, j)] += w * col[j].conj();
                }
            }
        }
        out
    }

    /// exp(-i h t) |psi> without forming the full matrix.
    pub fn evolve(&self, psi: &CVec, t: f64) -> CVec {
        let c = self.vectors.adjoint() * psi;
        let d = self.values.len();
        let rotated = CVec::from_fn(d, |k, _| c[k] * (-C64::i() * self.values[k] * t).exp());
        &self.vectors * rotated
    }

    pub fn reconstruct(&self) -> CMat {
        let d = self.values.len();
        let mut out = CMat::zeros(d, d);
        for k in 0..d {
            let col = self.vectors.column(k);
            for i in 0..d {
                let w = col[i] * C64::new(self.values[k], 0.0);
                for j in 0..d {
                    out[(i, j)] += w * col[j].conj();
                }
            }
        }
        out
    }
}

/// exp(-i h t) for Hermitian `h`.
pub fn unitary_exp(h: &CMat, t: f64) -> Result<CMat> {
    Ok(HermitianEigen::new(h)?.unitary_at(t))
}

/// Maximum elementwise deviation of `u` from unitarity.
pub fn unitarity_error(u: &CMat) -> f64 {
    let d = u.nrows();
    let prod = u * u.adjoint();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}
