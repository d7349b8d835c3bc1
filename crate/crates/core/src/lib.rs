//! Fairness-aware contrastive representation learning for tabular data.

pub mod data;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod sampler;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
