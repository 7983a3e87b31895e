//! Bernstein-Vazirani simulation and benchmarking.
//!
//! The crate is organised bottom-up:
//!
//! - [`quantum`]: dense state vectors, density matrices, unitaries and Kraus channels.
//! - [`circuit`]: gate set, circuit IR and BV circuit construction.
//! - [`simulator`]: ideal state-vector and noisy density-matrix execution.
//! - [`noise`]: calibration snapshots and the channels derived from them.
//! - [`tomography`]: Pauli-basis state tomography with physical projection.
//! - [`metrics`]: success probability, Hellinger distance and summary statistics.
//! - [`harness`]: the 11-pattern benchmark suite, scenarios and reports.

pub mod error;
pub mod circuit;
pub mod quantum;
pub mod noise;
pub mod simulator;
pub mod tomography;
pub mod metrics;
pub mod harness;

pub use error::{Error, Result};
