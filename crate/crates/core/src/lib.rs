//! Core of the fedleak test bench.
//!
//! Everything here is a pure function over value data: synthetic genotype
//! generation, the logistic model, FedAvg orchestration, the three inference
//! attacks, metric bookkeeping and the figure-backing analytics. File formats,
//! threading and the CLI live in the `fedleak` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod attacks;
mod error;
pub mod fedsim;
pub mod linmodel;
pub mod metrics;
pub mod pipeline;
pub mod seeds;
pub mod synthgen;

pub use error::{Error, Result};
