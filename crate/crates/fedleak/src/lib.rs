//! File formats, run directory layout and the `fedleak` command line on top
//! of [`fedleak_core`].

pub mod analysis_files;
pub mod attack_log;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod manifest;
pub mod model;
pub mod report;

pub use error::{AppError, Result};
