//! Cross-modal text ↔ painting retrieval in a shared 128-d space.
//!
//! Text side: tf-idf of the comment ⊕ tf-idf of the title ⊕ one-hot of the
//! ground-truth attribute. Visual side: the base feature ⊕ the frozen
//! context-aware classifier's output. Both go through `dense → tanh → L2`
//! and are trained with the cosine-margin loss on in-batch pairs.

mod model;
mod rank;
mod tfidf;

pub use model::{
    encode_text, encode_visual, train_retrieval, RetrievalConfig, RetrievalModel, RetrievalPair,
};
pub use rank::{
    rank, ranked_by_similarity, rankings_to_json_lines, relevant_ranks, similarity_matrix, write_rankings, Direction,
    RankingRecord,
};
pub use tfidf::{build_tfidf_vocab, text_tokens, TfIdfVocab, VOCAB_MAGIC};
