//! Dissipative pairing in fermionic lattices and qubit chains.
//!
//! A single localized jump operator `u c_0 - v e^{i phi} c_1^dagger` cools a
//! chiral lattice into a pure, volume-law entangled Gaussian state. The crate
//! contains the free-fermion machinery, an exact Lindblad solver for the
//! corresponding qubit chain, the Jordan-Wigner bridge between the two, and a
//! reservoir-engineering check based on a driven lossy cavity.

pub mod cavity;
pub mod config;
pub mod error;
pub mod fermi_gaussian;
pub mod fit;
pub mod io;
pub mod jw_bridge;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod propagate;
pub mod spin_exact;
pub mod superop;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
