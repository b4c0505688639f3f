//! Pipeline orchestration for pulsepair: JSON configuration, the stage
//! runner behind the `pulsepair` CLI, CSV tables, SVG figures and run
//! manifests.

pub mod config;
pub mod csvio;
pub mod manifest;
pub mod oracle;
pub mod pipeline;
pub mod scenarios;
pub mod selftest;
pub mod svg;

pub use config::{ConfigError, PipelineConfig};
pub use manifest::{verify_dir, RunManifest};
pub use pipeline::{execute, Command, PipelineError};
