//! Library side of the `stm` command-line tool: experiment configuration,
//! subcommand implementations, pipelines and run manifests.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod report;

pub use config::{AnalysisToggles, ExperimentConfig};
pub use manifest::{Assertion, RunManifest, StageTime};
pub use pipeline::{run_pipeline, run_refine, RefineRow, RefinementRow};
