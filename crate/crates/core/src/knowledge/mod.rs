//! Key-value knowledge base: descriptions are embedded and matched against
//! an instruction by cosine similarity; the best match above a threshold
//! supplies its code to the prompt.

mod base;
mod embed;
mod similarity;

pub use base::{answer_with_knowledge, KnowledgeBase, KnowledgeEntry, MatchResult, ScoredEntry, DEFAULT_THRESHOLD};
pub use embed::{Embedder, HashEmbedder, HttpEmbedder, ScaledEmbedder, StaticEmbedder};
pub use similarity::cosine_similarity;
