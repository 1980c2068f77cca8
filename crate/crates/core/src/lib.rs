//! Algorithmic core for cross-lingual entity label mapping.
//!
//! Everything here is `no_std` + `alloc`: class-graph closure and
//! classification, dataset construction, similarity scoring, greedy
//! best-match selection and evaluation. Reading dumps, vector stores and
//! TSV artifacts lives in the `label-bridge` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod evaluation;
pub mod ingest;
pub mod matcher;
pub mod scoring;
pub mod text;
pub mod types;

mod seed;

pub use types::{EntityId, GroupKey, LabelPair, Method, ScoredPair, ScorerId};
