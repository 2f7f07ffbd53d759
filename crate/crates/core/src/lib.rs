//! Numerical toolkit for mild solutions of the fractional Navier-Stokes
//! equations `∂ₜu + (-Δ)^{α/2}u + P div(u⊗u) = P f`, `1 < α < 2`.

pub mod descriptor;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod kernels;
pub mod norms;
pub mod operators;
pub mod params;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
