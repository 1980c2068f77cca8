//! Dump ingestion, artifact formats, embedding and language-ID providers,
//! configuration and the `label-bridge` command-line pipeline.

pub mod artifacts;
pub mod config;
pub mod dump;
pub mod error;
pub mod pipeline;
pub mod providers;
pub mod vectors;

pub use error::{Error, Result};
