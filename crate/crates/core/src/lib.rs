//! Randomized benchmarking of incoherent and coherent leakage.
//!
//! - [`liouville`]: channels, operator bases, survival and leakage rates.
//! - [`gatesets`]: gate groups, twirl projectors, gate-dependence bounds.
//! - [`noise`]: filter and shelving noise models, Haar sampling.
//! - [`protocol`]: random sequences, exact and shot-sampled survival
//!   probabilities, decay datasets, brute-force expectations.
//! - [`fitting`]: damped least-squares fits of the decay models.
//! - [`cli`]: the `leakage-rb` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod fitting;
pub mod gatesets;
pub mod liouville;
pub mod noise;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
