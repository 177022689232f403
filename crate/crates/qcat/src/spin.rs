//! Spin operators, Dicke states, coherent spin states, and cat-state targets.
//!
//! Conventions used throughout the crate:
//!
//! * The Dicke basis is ordered by decreasing projection, `m = I, I-1, ..., -I`,
//!   so index `k` holds `m = I - k`.
//! * `rotation_operator(axis, angle)` is `exp(-i * angle * (axis . I))`, which
//!   rotates Bloch vectors by `angle` about `axis` with the right-hand rule.
//! * `coherent_spin_state(theta, phi)` is
//!   `exp[i*theta*(sin(phi) Ix - cos(phi) Iy)] |I, I>`, i.e. the top Dicke
//!   state rotated by `theta` about the axis `(-sin(phi), cos(phi), 0)`. The
//!   two conventions agree: the same operator is
//!   `rotation_operator((-sin(phi), cos(phi), 0), theta)`.
//! * The six cardinal kets are pinned as coherent states with these angles:
//!   `|+Z> = |theta=0>` (the top Dicke state itself), `|-Z> = |pi, 0>`
//!   (which equals the bottom Dicke state exactly, with phase +1),
//!   `|+X> = |pi/2, 0>`, `|-X> = |pi/2, pi>`, `|+Y> = |pi/2, pi/2>`,
//!   `|-Y> = |pi/2, 3pi/2>`. All relative phases of cat targets are stated
//!   with respect to this pinning.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{QcatError, Result};
use crate::linalg::{self, CMat, CVec};

/// Spin quantum number, stored as `2I` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Spin {
    twice_i: u32,
}

impl Spin {
    /// Supported range covers I = 1 through 9/2.
    pub fn from_twice(twice_i: u32) -> Result<Self> {
        if !(2..=9).contains(&twice_i) {
            return Err(QcatError::UnsupportedSpin(twice_i));
        }
        Ok(Self { twice_i })
    }

    pub fn twice(self) -> u32 {
        self.twice_i
    }

    /// Hilbert-space dimension, `2I + 1`.
    pub fn dim(self) -> usize {
        self.twice_i as usize + 1
    }

    /// The value of I as a float (exact for half-integers).
    pub fn value(self) -> f64 {
        self.twice_i as f64 / 2.0
    }

    /// Projections `2m` from `2I` down to `-2I` in basis order.
    pub fn projections(self) -> impl Iterator<Item = i32> {
        let t = self.twice_i as i32;
        (0..=self.twice_i as i32).map(move |k| t - 2 * k)
    }
}

/// Angular-momentum matrices for a given spin, in the Dicke basis.
#[derive(Debug, Clone)]
pub struct SpinOps {
    pub spin: Spin,
    pub ix: CMat,
    pub iy: CMat,
    pub iz: CMat,
    /// I(I+1) times the identity.
    pub casimir: CMat,
}

impl SpinOps {
    pub fn new(spin: Spin) -> Self {
        let d = spin.dim();
        let t = spin.twice() as f64;
        let mut iz = CMat::zeros(d, d);
        for (k, twice_m) in spin.projections().enumerate() {
            iz[(k, k)] = C64::new(twice_m as f64 / 2.0, 0.0);
        }
        // Raising operator: <m+1| I+ |m> = sqrt((I-m)(I+m+1)) = sqrt(k(2I-k+1))
        // for the state at index k.
        let mut iplus = CMat::zeros(d, d);
        for k in 1..d {
            let kf = k as f64;
            iplus[(k - 1, k)] = C64::new((kf * (t - kf + 1.0)).sqrt(), 0.0);
        }
        let iminus = iplus.adjoint();
        let ix = (&iplus + &iminus).scale(0.5);
        let iy = (&iplus - &iminus) * C64::new(0.0, -0.5);
        let i = spin.value();
        let casimir = CMat::identity(d, d).scale(i * (i + 1.0));
        Self {
            spin,
            ix,
            iy,
            iz,
            casimir,
        }
    }

    /// The component of the spin vector along a unit direction.
    pub fn along(&self, direction: [f64; 3]) -> CMat {
        self.ix.scale(direction[0]) + self.iy.scale(direction[1]) + self.iz.scale(direction[2])
    }
}

/// A pure spin state in the Dicke basis (ordered `m = I ... -I`), unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    amplitudes: CVec,
}

impl State {
    /// Wraps an amplitude vector, requiring unit norm.
    pub fn try_new(amplitudes: CVec) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(QcatError::NotNormalized { norm });
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes and wraps an amplitude vector.
    pub fn from_unnormalized(amplitudes: CVec) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return Err(QcatError::NotNormalized { norm });
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    /// <self|other>.
    pub fn inner(&self, other: &State) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Applies a (presumed unitary) matrix.
    pub fn apply(&self, u: &CMat) -> State {
        State {
            amplitudes: u * &self.amplitudes,
        }
    }

    /// |self><self| as a density matrix.
    pub fn to_density(&self) -> DensityMatrix {
        let d = self.dim();
        let m = CMat::from_fn(d, d, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        DensityMatrix { entries: m }
    }
}

/// A mixed spin state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMat,
}

impl DensityMatrix {
    pub fn try_new(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(QcatError::InvalidDensityMatrix {
                reason: format!("not square: {}x{}", entries.nrows(), entries.ncols()),
            });
        }
        let herm = linalg::hermiticity_error(&entries);
        if herm > 1e-10 {
            return Err(QcatError::InvalidDensityMatrix {
                reason: format!("not Hermitian (asymmetry {herm:.3e})"),
            });
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(QcatError::InvalidDensityMatrix {
                reason: format!("trace = {tr}"),
            });
        }
        let eigen = linalg::HermitianEigen::new(&entries)?;
        let min_eig = eigen.values.min();
        if min_eig < -1e-8 {
            return Err(QcatError::InvalidDensityMatrix {
                reason: format!("negative eigenvalue {min_eig:.3e}"),
            });
        }
        Ok(Self { entries })
    }

    /// Wraps without validation; for internal evolution loops where the
    /// invariants hold by construction.
    pub(crate) fn from_entries_unchecked(entries: CMat) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// trace(rho^2).
    pub fn purity(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                s += (self.entries[(i, j)] * self.entries[(j, i)]).re;
            }
        }
        s
    }

    /// rho -> u rho u†.
    pub fn conjugate(&self, u: &CMat) -> DensityMatrix {
        DensityMatrix {
            entries: u * &self.entries * u.adjoint(),
        }
    }
}

/// An instantaneous rotation pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseEvent {
    /// Application time in units of 1/f_Q.
    pub time: f64,
    /// Unit rotation axis.
    pub axis: [f64; 3],
    /// Rotation angle in radians.
    pub angle: f64,
}

impl PulseEvent {
    pub fn new(time: f64, axis: [f64; 3], angle: f64) -> Result<Self> {
        if time < 0.0 || !time.is_finite() {
            return Err(QcatError::InvalidArgument(format!(
                "pulse time must be finite and nonnegative, got {time}"
            )));
        }
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(QcatError::InvalidArgument(format!(
                "pulse axis must be a unit vector, |axis| = {norm}"
            )));
        }
        let axis = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
        Ok(Self { time, axis, angle })
    }

    /// A rotation about +x, the default pulse axis.
    pub fn x(time: f64, angle: f64) -> Result<Self> {
        Self::new(time, [1.0, 0.0, 0.0], angle)
    }
}

/// Which pair of antipodal coherent states a cat target is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CatBound {
    /// Components at the +z/-z poles.
    Polar,
    /// Components on the equator at +y/-y.
    Equator,
    /// Components on the equator at +x/-x.
    XAxis,
}

/// The Dicke state |I, m>, given as twice_m to keep half-integers exact.
pub fn dicke_state(spin: Spin, twice_m: i32) -> Result<State> {
    let t = spin.twice() as i32;
    if twice_m.abs() > t || (t - twice_m) % 2 != 0 {
        return Err(QcatError::InvalidProjection {
            twice_i: spin.twice(),
            twice_m,
        });
    }
    let index = ((t - twice_m) / 2) as usize;
    let mut v = CVec::zeros(spin.dim());
    v[index] = C64::new(1.0, 0.0);
    Ok(State { amplitudes: v })
}

/// Rotation operator exp(-i * angle * (axis . I)).
pub fn rotation_operator(spin: Spin, axis: [f64; 3], angle: f64) -> Result<CMat> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(QcatError::InvalidArgument(format!(
            "rotation axis must be a unit vector, |axis| = {norm}"
        )));
    }
    let axis = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
    let ops = SpinOps::new(spin);
    let generator = ops.along(axis);
    linalg::unitary_exp(&generator, angle)
}

/// Coherent spin state centered at spherical angles (theta, phi):
/// exp[i*theta*(sin(phi) Ix - cos(phi) Iy)] |I, I>.
pub fn coherent_spin_state(spin: Spin, theta: f64, phi: f64) -> State {
    let axis = [-phi.sin(), phi.cos(), 0.0];
    let top = dicke_state(spin, spin.twice() as i32).expect("top Dicke state");
    if theta == 0.0 {
        return top;
    }
    let u = rotation_operator(spin, axis, theta).expect("unit axis by construction");
    top.apply(&u)
}

fn cardinal_pair(spin: Spin, bound: CatBound) -> (State, State) {
    match bound {
        CatBound::Polar => (
            coherent_spin_state(spin, 0.0, 0.0),
            coherent_spin_state(spin, PI, 0.0),
        ),
        CatBound::Equator => (
            coherent_spin_state(spin, PI / 2.0, PI / 2.0),
            coherent_spin_state(spin, PI / 2.0, 3.0 * PI / 2.0),
        ),
        CatBound::XAxis => (
            coherent_spin_state(spin, PI / 2.0, 0.0),
            coherent_spin_state(spin, PI / 2.0, PI),
        ),
    }
}

/// Two-component cat target [|A> + e^{i varphi}|-A>] / sqrt(2), with A the
/// cardinal coherent state selected by `bound`. Antipodal coherent states are
/// exactly orthogonal, so the normalization is varphi-independent.
pub fn cat_target(spin: Spin, bound: CatBound, varphi: f64) -> State {
    let (a, b) = cardinal_pair(spin, bound);
    let phase = C64::from_polar(1.0, varphi);
    let v = (a.amplitudes + b.amplitudes.scale(1.0) * phase).unscale(std::f64::consts::SQRT_2);
    State { amplitudes: v }
}

/// Four-component cat target
/// [(|Z> + |-Z>) + e^{i rotor_phase} (|Y> - i |-Y>)], normalized.
///
/// The equatorial pair carries the opposite Yurke-Stoler handedness to the
/// single-pulse equator-bound cat; with the cardinal-ket pinning above this
/// is the structure the three-pulse splitting sequence produces, and
/// `rotor_phase = pi` is the fixed template it matches right after the final
/// pulse.
pub fn n4_target(spin: Spin, rotor_phase: f64) -> State {
    let (zp, zm) = cardinal_pair(spin, CatBound::Polar);
    let (yp, ym) = cardinal_pair(spin, CatBound::Equator);
    let rotor = C64::from_polar(1.0, rotor_phase);
    let equator_pair = yp.amplitudes + ym.amplitudes * C64::new(0.0, -1.0);
    let v = zp.amplitudes + zm.amplitudes + equator_pair * rotor;
    State::from_unnormalized(v).expect("nonzero by construction")
}

/// Angular frequency of the internal rotor of the four-component cat for
/// I = 5/2: twice the fundamental eigenfrequency, 2*(2*sqrt(7)*omega_Q/3)
/// with omega_Q = 2*pi in simulation units.
pub fn n4_rotor_frequency() -> f64 {
    2.0 * fundamental_frequency_5half()
}

/// Fundamental eigenfrequency omega_1 = 2*sqrt(7)*omega_Q/3 of the I = 5/2
/// fully biaxial Hamiltonian, in simulation units (omega_Q = 2*pi).
pub fn fundamental_frequency_5half() -> f64 {
    2.0 * 7.0f64.sqrt() * std::f64::consts::TAU / 3.0
}
