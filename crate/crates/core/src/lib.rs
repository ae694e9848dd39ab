//! Retrieval-augmented visual classification.
//!
//! Image embeddings of reference specimens are stored with species,
//! category and a text description. At query time the nearest entries are
//! retrieved, their descriptions are injected into a prompt, a multimodal
//! model answers, and the answer is parsed back into a taxonomy label.
//! The [`eval`] module measures both the retrieval step and the final
//! answers; [`pca`] projects embeddings for visual inspection.

pub mod error;
pub mod eval;
pub mod kb;
pub mod llm;
pub mod model;
pub mod pca;
pub mod pipeline;
pub mod store;
pub mod synthetic;
pub mod taxonomy;

pub use error::{Error, Result};
pub use model::{
    cosine_similarity, normalize, EmbeddingVector, KnowledgeEntry, Label, RetrievalHit,
};
pub use store::{EngineKind, HnswParams, StoreIndex};
pub use taxonomy::Taxonomy;
