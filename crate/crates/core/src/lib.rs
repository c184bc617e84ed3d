//! Numerical companion to the blowup theory of the half-wave equation
//! i∂ₜu + (−Δ)^{1/2}u = |u|^p.
//!
//! The crate evaluates fractional Laplacians two independent ways, checks the
//! exact gamma identities and pointwise decay estimates behind the
//! test-function method, integrates the equation pseudospectrally until
//! blowup, and fits measured lifespans against the critical, subcritical and
//! one-dimensional lifespan laws.

pub mod advection;
pub mod error;
pub mod fraclap;
pub mod grid;
pub mod lifespan;
pub mod quadrature;
pub mod solver;
pub mod specfun;
pub mod testfn;

pub use error::{Error, Result};
pub use grid::{GridSpec, ScalarField};
