//! Experiment harness for clustering-based modulation format identification.
//!
//! The `mfi` binary wraps these modules; the acceptance suite drives them
//! directly.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod sample_io;

pub use config::{ComplexityConfig, ExperimentConfig, PipelineConfig};
pub use sample_io::SampleFile;
