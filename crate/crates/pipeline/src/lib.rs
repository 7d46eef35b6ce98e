//! Orchestration for the curation pipeline: per-stage execution with
//! checkpoints, adapter selection and the HTTP review service.

pub mod adapters;
pub mod review;
pub mod run;
pub mod stages;

pub use run::{run_pipeline, stage_order, RunError, RunOptions, RunSummary, Workspace};
