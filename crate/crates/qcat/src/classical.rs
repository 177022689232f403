//! Mean-field phase-space flow of the quadrupole Hamiltonian.
//!
//! For a classical spin direction (theta, phi) the canonical pair is
//! (phi, P = cos(theta)), with
//!
//! ```text
//! dphi/dt = (2 pi I / 3) * P * (3 - eta cos(2 phi))
//! dP/dt   = (2 pi I / 3) * eta * (1 - P^2) * sin(2 phi)
//! ```
//!
//! and conserved energy H = (2 pi I / 6) * [3 P^2 + eta (1 - P^2) cos(2 phi)]
//! in simulation units (f_Q = 1, h = 2 pi).

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{QcatError, Result};

/// A point of the canonical phase space (phi, P = cos theta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalState {
    pub phi: f64,
    pub p_phi: f64,
}

impl ClassicalState {
    pub fn new(phi: f64, p_phi: f64) -> Result<Self> {
        if p_phi.abs() > 1.0 {
            return Err(QcatError::InvalidArgument(format!(
                "|P| must not exceed 1, got {p_phi}"
            )));
        }
        Ok(Self { phi, p_phi })
    }
}

/// Stability classification of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    StableCenter,
    UnstableSaddle,
    /// The entire equator degenerates into fixed points at eta = 0.
    DegenerateLine,
}

/// Location of a fixed point; the poles are coordinate-singular in the
/// (phi, P) chart and get their own marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointLocation {
    Chart(ClassicalState),
    NorthPole,
    SouthPole,
    /// P = 0 line (every phi), for the degenerate uniaxial case.
    EquatorLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointRecord {
    pub location: FixedPointLocation,
    pub kind: FixedPointKind,
}

/// Right-hand side of the flow at a phase-space point.
pub fn flow_rhs(eta: f64, spin_value: f64, s: ClassicalState) -> (f64, f64) {
    let c = TAU * spin_value / 3.0;
    let dphi = c * s.p_phi * (3.0 - eta * (2.0 * s.phi).cos());
    let dp = c * eta * (1.0 - s.p_phi * s.p_phi) * (2.0 * s.phi).sin();
    (dphi, dp)
}

/// Conserved classical energy.
pub fn classical_energy(eta: f64, spin_value: f64, s: ClassicalState) -> f64 {
    TAU * spin_value / 6.0
        * (3.0 * s.p_phi * s.p_phi + eta * (1.0 - s.p_phi * s.p_phi) * (2.0 * s.phi).cos())
}

fn rk4_step(eta: f64, spin_value: f64, s: ClassicalState, dt: f64) -> ClassicalState {
    let f = |st: ClassicalState| flow_rhs(eta, spin_value, st);
    let k1 = f(s);
    let at = |st: ClassicalState, k: (f64, f64), h: f64| ClassicalState {
        phi: st.phi + k.0 * h,
        p_phi: st.p_phi + k.1 * h,
    };
    let k2 = f(at(s, k1, dt / 2.0));
    let k3 = f(at(s, k2, dt / 2.0));
    let k4 = f(at(s, k3, dt));
    ClassicalState {
        phi: s.phi + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        p_phi: (s.p_phi + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1)).clamp(-1.0, 1.0),
    }
}

/// Fourth-order trajectory integration with fixed step `dt`, returning the
/// state at every step including the initial one.
pub fn integrate_flow(
    s0: ClassicalState,
    eta: f64,
    spin_value: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<ClassicalState>> {
    if dt <= 0.0 || t_end < 0.0 {
        return Err(QcatError::InvalidArgument(format!(
            "need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = s0;
    out.push(s);
    for _ in 0..steps {
        s = rk4_step(eta, spin_value, s, dt);
        out.push(s);
    }
    Ok(out)
}

/// Enumerates the fixed points of the flow and classifies them through the
/// Jacobian: purely imaginary eigenvalues give centers, a real pair gives a
/// saddle.
pub fn fixed_points(eta: f64) -> Vec<FixedPointRecord> {
    let mut out = vec![
        FixedPointRecord {
            location: FixedPointLocation::NorthPole,
            kind: FixedPointKind::StableCenter,
        },
        FixedPointRecord {
            location: FixedPointLocation::SouthPole,
            kind: FixedPointKind::StableCenter,
        },
    ];
    if eta == 0.0 {
        out.push(FixedPointRecord {
            location: FixedPointLocation::EquatorLine,
            kind: FixedPointKind::DegenerateLine,
        });
        return out;
    }
    for phi in [0.0, PI, PI / 2.0, 3.0 * PI / 2.0] {
        let state = ClassicalState { phi, p_phi: 0.0 };
        out.push(FixedPointRecord {
            location: FixedPointLocation::Chart(state),
            kind: classify_equatorial(eta, state),
        });
    }
    out
}

/// Jacobian-based classification of an equatorial fixed point (P = 0).
fn classify_equatorial(eta: f64, s: ClassicalState) -> FixedPointKind {
    // J = [[d(dphi)/dphi, d(dphi)/dP], [d(dP)/dphi, d(dP)/dP]] at (phi, 0):
    //   [[0,                 3 - eta cos(2 phi)],
    //    [2 eta cos(2 phi),  0                 ]] * (2 pi I / 3)
    // det J < 0 -> real eigenvalue pair -> saddle; det J > 0 -> center.
    let cos2 = (2.0 * s.phi).cos();
    let det = -(3.0 - eta * cos2) * 2.0 * eta * cos2;
    if det < 0.0 {
        FixedPointKind::UnstableSaddle
    } else {
        FixedPointKind::StableCenter
    }
}

/// One sample of a portrait trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PortraitSample {
    pub trajectory_id: usize,
    pub t: f64,
    pub phi: f64,
    pub p_phi: f64,
    /// Euclidean norm of the phase-space velocity, for line-thickness styling.
    pub speed: f64,
}

/// Integrates one trajectory per seed and tags every sample with the local
/// flow speed. Row count is seeds x (steps + 1).
pub fn portrait_dataset(
    eta: f64,
    spin_value: f64,
    seeds: &[ClassicalState],
    t_end: f64,
    dt: f64,
) -> Result<Vec<PortraitSample>> {
    if seeds.is_empty() {
        return Err(QcatError::InvalidArgument("no portrait seeds given".into()));
    }
    let mut out = Vec::new();
    for (id, &seed) in seeds.iter().enumerate() {
        let traj = integrate_flow(seed, eta, spin_value, t_end, dt)?;
        for (k, s) in traj.iter().enumerate() {
            let (dphi, dp) = flow_rhs(eta, spin_value, *s);
            out.push(PortraitSample {
                trajectory_id: id,
                t: k as f64 * dt,
                phi: s.phi,
                p_phi: s.p_phi,
                speed: (dphi * dphi + dp * dp).sqrt(),
            });
        }
    }
    Ok(out)
}
