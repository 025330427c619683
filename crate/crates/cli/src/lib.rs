//! Driver for the `nfkam` command-line tool: model configs, the stage
//! pipeline and report generation.

pub mod config;
pub mod pipeline;
pub mod report;
