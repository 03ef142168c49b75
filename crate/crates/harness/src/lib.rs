//! Configuration, data handling and experiment drivers behind the `rknn` CLI.

pub mod analysis;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;

pub use error::{HarnessError, Result};
