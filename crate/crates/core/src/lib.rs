//! First-photon image classification.
//!
//! Binary MNIST digits are encoded as amplitude masks on a Gaussian beam and
//! classified from a single detected photon, either by projecting onto ten
//! Hermite-Gaussian modes ([`qc`]) or by reading out one index pixel per
//! label ([`cc`]).

pub mod cc;
pub mod confusion;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod optics;
pub mod qc;
pub mod rng;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
