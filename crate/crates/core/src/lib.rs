//! Single-electron transport through a donor and a quantum dot in parallel.
//!
//! The crate covers the capacitance model and closed-form observables
//! ([`device`], [`energy`]), the sequential-tunneling master equation
//! ([`transport`]), grid sweeps producing stability diagrams ([`sweep`]),
//! parameter extraction from those diagrams ([`analysis`]) and the
//! command-line driver ([`cli`]).

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod device;
pub mod energy;
pub mod error;
pub mod manifest;
pub mod sweep;
pub mod transport;
pub mod units;

pub use device::{BiasPoint, CapacitanceSet, DeviceSpec, DotIndex, DotSpec, DotSpectrum, Terminal};
pub use error::{Error, Result};
