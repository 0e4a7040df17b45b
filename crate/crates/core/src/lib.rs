//! Saturation analysis of IEEE 802.11e EDCA access categories.
//!
//! The analytic path runs [`coupling::solve_fixed_point`] over the four
//! per-AC backoff chains ([`chain`]), converts the probabilities into time
//! with [`timing`], and assembles per-AC delay and jitter in [`metrics`].
//! Two independent checks sit beside it: [`oracle`] builds the explicit
//! single-AC chain and solves it numerically, and [`sim`] runs a slotted
//! simulation of saturated EDCA stations.

pub mod chain;
pub mod config;
pub mod error;
pub mod coupling;
pub mod metrics;
pub mod oracle;
pub mod params;
pub mod sim;
pub mod timing;

pub use error::{Error, Result};
