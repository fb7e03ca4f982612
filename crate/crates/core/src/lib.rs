//! Simulation, harmonic analysis and statistical testing of random fields
//! on the unit sphere through their spherical-harmonic coefficients.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod harmonics;
pub mod io;
pub mod wigner;
pub mod cli;

pub use error::{Error, Result};
