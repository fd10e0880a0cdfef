//! Continual learning with proactive low-rank subspace allocation.

pub mod cli;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod plan;
pub mod plot;
pub mod tasks;
pub mod tensor;
pub mod variants;

pub use error::{Error, Result};
