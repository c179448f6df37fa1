//! Configuration-driven experiments on top of `kmgraph`.

pub mod commands;
pub mod config;
pub mod plot;

pub use config::{Couplings, ExperimentConfig};
