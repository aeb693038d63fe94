//! Walk-based embeddings for RDF knowledge graphs.
//!
//! The crate covers the whole chain from N-Triples to a classification
//! score:
//!
//! - [`rdf`]: N-Triples parsing and the triple-expanded [`KnowledgeGraph`]
//!   where every predicate occurrence becomes its own vertex.
//! - [`walks`]: exhaustive, sampled and community-hop walk extraction.
//! - [`community`]: Louvain partitions over the undirected projection.
//! - [`transforms`]: anonymous walks, walklets, HALK and n-gram relabelling.
//! - [`wl`]: Weisfeiler-Lehman relabelling, WL corpora and the entity
//!   bijection checker.
//! - [`corpus`]: the walk corpus type and its line-oriented file format.
//! - [`embedding`]: skip-gram with negative sampling.
//! - [`evaluation`]: logistic-regression node classification, repeated runs
//!   and average-rank tables.

pub mod community;
pub mod corpus;
pub mod digest;
pub mod embedding;
mod error;
pub mod evaluation;
pub mod rdf;
pub mod seed;
pub mod synth;
pub mod transforms;
pub mod walks;
pub mod wl;

pub use community::CommunityPartition;
pub use corpus::WalkCorpus;
pub use embedding::{EmbeddingMatrix, TrainingConfig, Vocabulary};
pub use error::{Error, Result};
pub use rdf::{KnowledgeGraph, Term, Triple, VertexId, VertexKind};
pub use walks::{Walk, WalkConfig};
pub use wl::WlLabelStore;
