//! Simulation and verification tools for infinite systems of interacting
//! Brownian particles.

mod error;

pub mod analysis;
pub mod drift;
pub mod io;
pub mod models;
pub mod pointfields;
pub mod quad;
pub mod sde;

pub use error::{Error, Result};
