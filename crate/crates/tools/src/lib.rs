//! File formats, ingestion and the command-line pipeline around
//! `adsage-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod labels;
pub mod report;
pub mod scores;
pub mod wordvec;

pub use error::{ToolError, ToolResult};
