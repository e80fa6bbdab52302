//! Ising Glauber dynamics restricted to a phase, random-cluster couplings,
//! coarse-graining, and the estimators used to probe phase mixing.

pub mod error;
pub mod geometry;
pub mod glauber;
pub mod ising;
pub mod coarse;
pub mod estimators;
pub mod oracle;
pub mod random_cluster;
pub mod reveal;
pub mod seed;
pub mod unionfind;

pub use error::{Error, Result};
