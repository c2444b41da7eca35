//! Context-aware art analysis: knowledge graph construction, node2vec
//! context embeddings, multitask and graph-supervised classifiers, and
//! cross-modal retrieval.

pub mod autodiff;
mod binio;
pub mod error;
pub mod evalsuite;
pub mod ingest;
pub mod kgraph;
pub mod models;
pub mod node2vec;
pub mod pipeline;
pub mod retrieval;
pub mod synth;

pub use error::{Error, Result};
