//! Medical video corpus curation: relevance gating, clip segmentation,
//! quality filtering, captioning, and the statistics behind quality gates
//! and human evaluation.

pub mod adapters;
pub mod caption;
pub mod config;
pub mod eval;
pub mod filter;
pub mod fingerprint;
pub mod manifest;
pub mod model;
pub mod relevance;
pub mod sampling;
pub mod segment;
pub mod synthetic;

pub use config::{ConfigError, PipelineConfig};
pub use manifest::{read_manifest, write_manifest, ManifestError, ManifestRecord, Record};
pub use model::{ClipRecord, ClipStatus, Stage, StageReport, VideoRecord};
