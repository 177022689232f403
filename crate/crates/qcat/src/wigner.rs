//! Spin Wigner quasi-probability distribution on the sphere.
//!
//! The map is built from the multipole expansion of the density matrix in the
//! orthonormal spherical-tensor basis,
//!
//! ```text
//! W(theta, phi) = c * sum_{k=0}^{2I} sum_{q=-k}^{k} rho_kq Y_kq(theta, phi),
//! rho_kq = trace(rho T_kq†),
//! ```
//!
//! with the scale c = sqrt((2I+1)/(4pi)) fixed so that the map of any state
//! integrates to exactly 1 over the sphere. Hermiticity of rho pairs the
//! +q/-q terms into complex conjugates, so the map is real.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{QcatError, Result};
use crate::spin::{DensityMatrix, Spin};
use crate::tensors::{spherical_harmonic, spherical_tensor};

/// Gridded Wigner map. `values[(i, j)]` holds W(theta_grid[i], phi_grid[j]).
#[derive(Debug, Clone)]
pub struct WignerMap {
    pub theta_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    pub values: nalgebra::DMatrix<f64>,
}

impl WignerMap {
    /// Surface integral over the sphere by trapezoid (theta) x rectangle
    /// (phi) quadrature; equals 1 up to grid resolution error.
    pub fn integral(&self) -> f64 {
        let n_t = self.theta_grid.len();
        let n_p = self.phi_grid.len();
        let d_theta = PI / (n_t - 1) as f64;
        let d_phi = 2.0 * PI / n_p as f64;
        let mut acc = 0.0;
        for i in 0..n_t {
            let w_t = if i == 0 || i == n_t - 1 { 0.5 } else { 1.0 };
            let sin_t = self.theta_grid[i].sin();
            for j in 0..n_p {
                acc += w_t * sin_t * self.values[(i, j)];
            }
        }
        acc * d_theta * d_phi
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Multipole coefficients of a density matrix, reusable across evaluation
/// points.
#[derive(Debug, Clone)]
pub struct WignerEvaluator {
    coeffs: Vec<(u32, i32, C64)>,
    scale: f64,
}

impl WignerEvaluator {
    pub fn new(rho: &DensityMatrix) -> Self {
        let spin = Spin::from_twice((rho.dim() - 1) as u32)
            .expect("density-matrix dimensions map to supported spins");
        let d = spin.dim();
        let mut coeffs = Vec::new();
        for k in 0..=spin.twice() {
            for q in -(k as i32)..=(k as i32) {
                let t = spherical_tensor(spin, k, q);
                let mut c = C64::new(0.0, 0.0);
                for a in 0..d {
                    for b in 0..d {
                        c += rho.entries()[(a, b)] * t[(a, b)].conj();
                    }
                }
                coeffs.push((k, q, c));
            }
        }
        Self {
            coeffs,
            scale: (d as f64 / (4.0 * PI)).sqrt(),
        }
    }

    /// W(theta, phi) at a single point.
    pub fn at(&self, theta: f64, phi: f64) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for &(k, q, c) in &self.coeffs {
            acc += c * spherical_harmonic(k, q, theta, phi);
        }
        debug_assert!(acc.im.abs() < 1e-9, "imaginary residue {}", acc.im);
        self.scale * acc.re
    }
}

/// Evaluates the Wigner function of `rho` at one point.
pub fn wigner_at(rho: &DensityMatrix, theta: f64, phi: f64) -> f64 {
    WignerEvaluator::new(rho).at(theta, phi)
}

/// Wigner map on a uniform grid: theta in [0, pi] inclusive with `n_theta`
/// points, phi in [0, 2pi) with `n_phi` points.
pub fn wigner_map(rho: &DensityMatrix, n_theta: usize, n_phi: usize) -> Result<WignerMap> {
    if n_theta < 2 || n_phi < 2 {
        return Err(QcatError::InvalidArgument(format!(
            "wigner grid must be at least 2x2, got {n_theta}x{n_phi}"
        )));
    }
    let evaluator = WignerEvaluator::new(rho);
    let theta_grid: Vec<f64> = (0..n_theta)
        .map(|i| PI * i as f64 / (n_theta - 1) as f64)
        .collect();
    let phi_grid: Vec<f64> = (0..n_phi)
        .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
        .collect();
    let rows: Vec<Vec<f64>> = theta_grid
        .par_iter()
        .map(|&theta| phi_grid.iter().map(|&phi| evaluator.at(theta, phi)).collect())
        .collect();
    let values = nalgebra::DMatrix::from_fn(n_theta, n_phi, |i, j| rows[i][j]);
    Ok(WignerMap {
        theta_grid,
        phi_grid,
        values,
    })
}
