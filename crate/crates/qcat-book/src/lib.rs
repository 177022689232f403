//! Imports every chapter of the book as module documentation so that
//! `cargo test --doc` compiles and runs each fenced code block. One module
//! per chapter keeps failing snippets easy to locate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/spin-states.md")]
pub mod spin_states {}

#[doc = include_str!("../../../book/src/quadrupole-dynamics.md")]
pub mod quadrupole_dynamics {}

#[doc = include_str!("../../../book/src/dephasing.md")]
pub mod dephasing {}

#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}

#[doc = include_str!("../../../book/src/classical-flow.md")]
pub mod classical_flow {}

#[doc = include_str!("../../../book/src/optimization.md")]
pub mod optimization {}

#[doc = include_str!("../../../book/src/protocols.md")]
pub mod protocols {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
