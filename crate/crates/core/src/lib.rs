//! Simulation and blow-up analysis for the one-dimensional thermoviscoelastic
//! system with temperature-dependent viscosity `γ(Θ)` and coupling `f(Θ)`.

pub mod certificates;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod io;
pub mod material;
pub mod quadrature;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};
