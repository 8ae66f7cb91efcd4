//! Information-gain reranking for retrieval-augmented QA.
//!
//! The pipeline measures, for every (query, document) pair, how much the
//! document changes a language model's confidence in the gold answer, turns
//! those gains into binary and group-ranking training signals, trains a
//! small scorer on hashed lexical features, and uses it at inference time to
//! reorder and filter retrieved documents before a single generation call.

pub mod config;
pub mod confidence;
pub mod dataset;
pub mod dig;
pub mod error;
pub mod eval;
pub mod features;
pub mod infer;
pub mod io;
pub mod lm;
pub mod losses;
pub mod model;
pub mod pipeline;
pub mod retrieval;
pub mod text;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
