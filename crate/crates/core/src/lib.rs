//! Energy-stable skew-symmetric SBP-SAT discretization of incompressible
//! two-phase (volume-of-fluid) flow in the variables `Φ = (√ρ, √ρ u₁, √ρ u₂, p)`.

pub mod boundary;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod interior;
pub mod pressure;
pub mod problem;
pub mod runner;
pub mod sbp;
pub mod scenario;
pub mod timestep;

pub use error::{Error, Result};
