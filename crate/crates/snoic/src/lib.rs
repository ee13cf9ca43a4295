//! File formats, experiment commands and reports on top of `snoic-core`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
pub use snoic_core as core;
