//! Performance prediction for nonbinary soft-decision FEC.
//!
//! The crate covers the chain from GF(2^m) symbols to post-FEC symbol error
//! rate: constellations and channels, nonbinary and bit-wise demodulation,
//! mutual-information-based metrics, quasi-cyclic NB-LDPC codes with a
//! layered belief-propagation decoder, and threshold calibration and
//! prediction on top of Monte Carlo simulation.

pub mod channel;
pub mod constellation;
pub mod db;
pub mod demod;
pub mod error;
pub mod gf;
pub mod ldpc;
pub mod metrics;
pub mod optimize;
pub mod predict;
pub mod quadrature;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
