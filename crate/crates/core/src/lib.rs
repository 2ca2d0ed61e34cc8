//! Simulation and verification toolkit for diffusions whose coefficients
//! switch at a random time.

pub mod arbitrage;
pub mod error;
pub mod exec;
pub mod filtration;
pub mod hedging;
pub mod model;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
