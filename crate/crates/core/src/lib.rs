//! Completely positive quantum Brownian motion.
//!
//! Coefficients from a Boltzmann-gas collision model, the master equation in
//! its double-commutator and single-generator forms, RK4 time evolution in a
//! truncated number basis, and complete-positivity diagnostics checked
//! against an exact Gaussian moment oracle.
//!
//! Units: everything is expressed in program units with `k_B = 1`; `ħ` is a
//! field of [`hilbert::BasisConfig`] (default 1) and is threaded through the
//! coefficient functions explicitly.

pub mod coefficients;
pub mod diagnostics;
pub mod error;
pub mod gaussian;
pub mod hilbert;
pub mod integrator;
pub mod linalg;
pub mod master_equation;

pub use error::{Error, Result};
pub use hilbert::{BasisConfig, DensityMatrix, OperatorMatrix, C64};
