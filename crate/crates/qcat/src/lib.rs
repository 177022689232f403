//! Simulation and pulse-parameter optimization for cat states of a single
//! quadrupolar nuclear spin evolving under the biaxial electric quadrupole
//! interaction, including open-system dephasing.
//!
//! Units: hbar = 1 and f_Q = 1 everywhere, so times are in 1/f_Q, rates in
//! f_Q, and the quadrupole angular frequency is omega_Q = 2*pi.

pub mod classical;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod measures;
pub mod optimize;
pub mod protocols;
pub mod spin;
pub mod tensors;
pub mod wigner;

pub use error::{QcatError, Result};
pub use spin::{CatBound, DensityMatrix, PulseEvent, Spin, SpinOps, State};
