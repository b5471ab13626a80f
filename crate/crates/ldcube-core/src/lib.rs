//! Quasi-Monte Carlo integration toolkit: randomized low-discrepancy
//! sequences, inverse-CDF measure transforms, a catalogue of test
//! integrands including a cantilevered-beam forward model, and adaptive
//! stopping criteria that grow the sample size until an error bound
//! meets the requested tolerance.

pub mod beam;
pub mod error;
pub mod integrands;
pub mod linalg;
pub mod measures;
pub mod quantile;
pub mod seq;
pub mod stopping;

pub use error::{Error, Result};
