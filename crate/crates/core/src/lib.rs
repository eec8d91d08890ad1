//! Seed-reproducible Bell-experiment simulator with a statistical-independence
//! analyzer.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod models;
pub mod ontic;
pub mod quantum;
pub mod settings;
pub mod trial;

pub use error::{Error, Result};
