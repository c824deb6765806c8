//! Numerical laboratory for the two-dimensional Ginzburg-Landau functional:
//! normal-state stability thresholds, the bifurcating branch at the first
//! magnetic Neumann eigenvalue, and nodal sets in half-flux domains.

pub mod bifurcation;
pub mod calculus;
pub mod domain;
pub mod error;
pub mod functional;
pub mod gauge;
pub mod linalg;
pub mod phasediagram;
pub mod spectra;
pub mod symmetry;

pub use error::{Error, Result};
