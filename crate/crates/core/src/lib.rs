//! Deterministic single-column moist convection by measure-preserving
//! parcel rearrangement, with an ensemble layer realizing probabilistic
//! initial data as weighted families of deterministic runs, and a
//! verification harness that turns the scheme's structural estimates into
//! executable checks.

pub mod cli;
pub mod config;
pub mod energy;
pub mod ensemble;
pub mod error;
pub mod export;
pub mod rearrange;
pub mod saturation;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
