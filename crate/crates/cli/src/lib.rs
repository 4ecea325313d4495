//! Stage-oriented driver for the paperrec pipeline.
//!
//! Stages read their inputs from and write their artifacts to paths taken from a
//! [`PipelineConfig`]; each can be re-run on its own.

pub mod config;
pub mod stages;

pub use config::{Artifact, ConfigError, PipelineConfig};
pub use stages::{run_stage, write_atomic, Stage, StageError, WordSource};
