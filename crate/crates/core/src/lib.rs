pub mod amplitude;
pub mod classical;
pub mod coeffs;
mod error;
pub mod harness;
pub mod lattice;
pub mod problem;
pub mod simulator;

pub use error::{Error, Result};
