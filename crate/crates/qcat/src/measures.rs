//! Fidelity, spin variances, and the normalized relative quantum Fisher
//! information used to quantify how cat-like a state is.

use crate::error::{QcatError, Result};
use crate::linalg::CMat;
use crate::spin::{DensityMatrix, Spin, SpinOps, State};

fn spin_for_dim(dim: usize) -> Spin {
    Spin::from_twice((dim - 1) as u32).expect("state dimensions map to supported spins")
}

/// Fidelity |<target|state>| between pure states.
pub fn fidelity(target: &State, state: &State) -> Result<f64> {
    if target.dim() != state.dim() {
        return Err(QcatError::DimensionMismatch {
            expected: target.dim(),
            got: state.dim(),
        });
    }
    Ok(target.inner(state).norm())
}

/// Root-overlap fidelity sqrt(<target|rho|target>) of a pure target with a
/// mixed state; reduces to the pure form when rho is a projector.
pub fn fidelity_mixed(target: &State, rho: &DensityMatrix) -> Result<f64> {
    if target.dim() != rho.dim() {
        return Err(QcatError::DimensionMismatch {
            expected: target.dim(),
            got: rho.dim(),
        });
    }
    let image = rho.entries() * target.amplitudes();
    let overlap = target.amplitudes().dotc(&image).re;
    Ok(overlap.max(0.0).sqrt())
}

fn direction_operator(dim: usize, direction: [f64; 3]) -> CMat {
    let norm =
        (direction[0] * direction[0] + direction[1] * direction[1] + direction[2] * direction[2])
            .sqrt();
    let unit = [
        direction[0] / norm,
        direction[1] / norm,
        direction[2] / norm,
    ];
    SpinOps::new(spin_for_dim(dim)).along(unit)
}

/// Variance <Iu^2> - <Iu>^2 of the spin component along `direction`.
pub fn spin_variance(state: &State, direction: [f64; 3]) -> f64 {
    let iu = direction_operator(state.dim(), direction);
    let image = &iu * state.amplitudes();
    let mean = state.amplitudes().dotc(&image).re;
    let mean_sq = image.dotc(&image).re;
    mean_sq - mean * mean
}

/// Variance of the spin component along `direction` in a mixed state.
pub fn spin_variance_mixed(rho: &DensityMatrix, direction: [f64; 3]) -> f64 {
    let iu = direction_operator(rho.dim(), direction);
    let mean = (&iu * rho.entries()).trace().re;
    let mean_sq = (&iu * &iu * rho.entries()).trace().re;
    mean_sq - mean * mean
}

/// Normalized relative quantum Fisher information along `direction`:
/// V(Iu) / I^2, ranging from 0 to 1 (1 only for a maximally separated cat
/// along the measured axis).
pub fn normalized_rqfi(state: &State, direction: [f64; 3]) -> f64 {
    let i = spin_for_dim(state.dim()).value();
    spin_variance(state, direction) / (i * i)
}

/// Normalized rQFI maximized over the three Cartesian axes.
pub fn normalized_rqfi_auto(state: &State) -> f64 {
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]
    .into_iter()
    .map(|axis| normalized_rqfi(state, axis))
    .fold(0.0, f64::max)
}

/// Normalized rQFI of a mixed state along `direction`.
pub fn normalized_rqfi_mixed(rho: &DensityMatrix, direction: [f64; 3]) -> f64 {
    let i = spin_for_dim(rho.dim()).value();
    spin_variance_mixed(rho, direction) / (i * i)
}
