//! Novelty-adaptive extended Kalman filtering for UWB range-based indoor
//! positioning, with a range simulator, an autoencoder novelty scorer and an
//! experiment harness.

pub mod autoencoder;
pub mod ekf;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mapping;
pub mod metrics;
pub mod scenarios;
pub mod simulator;
pub mod trilateration;

pub use error::{Error, Result};
