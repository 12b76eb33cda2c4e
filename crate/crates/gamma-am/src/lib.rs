//! File formats, configuration and the end-to-end pipeline around
//! `gamma-am-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod format;
pub mod manifest;
pub mod obo;
pub mod pipeline;
pub mod synth;
pub mod tables;

pub use config::{Balancing, PipelineConfig, Settings};
pub use error::{Error, ErrorRecord, Result};
pub use exec::RayonExecutor;
pub use manifest::RunManifest;
