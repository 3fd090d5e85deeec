//! Configuration, dataset ingestion, batch orchestration, and the command
//! implementations behind the CLI.

mod commands;
mod config;
pub mod io;
mod manifest;
mod provenance;

pub use commands::{
    batch, build_cache, evaluate, open_cache, render, trace_psf, BatchSummary, EvaluateKind,
    EvaluationReport, PsfCacheHeaderInfo, PsfStats, RenderMode, RenderOutput, TracePsfOutput,
};
pub use config::{MetricsSettings, PipelineConfig, PsfSettings};
pub use manifest::{DatasetManifest, ManifestItem};
pub use provenance::{config_hash, file_hash, item_hash};
