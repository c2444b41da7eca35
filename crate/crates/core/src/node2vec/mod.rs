//! Context embeddings for graph nodes: second-order biased random walks
//! followed by skip-gram with negative sampling.

mod skipgram;
mod walk;

pub use skipgram::{train_embeddings, train_skipgram, SkipGramConfig, SkipGramModel};
pub use walk::{generate_walks, next_step_distribution, walk_from, WalkConfig};
