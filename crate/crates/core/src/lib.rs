//! Potential-well laboratory for the nonlocal Neumann p(x)-Laplacian
//! diffusion equation with a variable-exponent source.

pub mod classify;
pub mod config;
pub mod energy;
pub mod error;
pub mod exponent;
pub mod grid;
pub mod io;
pub mod norms;
pub mod ode;
pub mod poincare;
pub mod runner;
pub mod solver;
pub mod witness;

pub use error::{Error, Result};
