//! Cyclist collision video pipeline.

pub mod autograd;
pub mod cli;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod synth;
pub mod tasks;
pub mod tensor;
#[cfg(test)]
pub(crate) mod testutil;
pub mod train;
pub mod video;

pub use error::{Error, Result};
