//! Static word vectors built from topic-partitioned contextual mentions.
//!
//! The pipeline runs in five steps:
//!
//! 1. [`corpus`] tokenizes a document corpus and builds the word-mention index.
//! 2. [`topics`] fits an LDA model by collapsed Gibbs sampling, scores topic
//!    importance per word and samples topic-specific or random mentions.
//! 3. [`encoding`] turns mentions into per-layer vectors through an
//!    [`encoding::Encoder`], and defines the `CVS1` vector store format.
//! 4. [`aggregate`] averages mention vectors into static vectors per variant,
//!    with PCA reduction and nearest-neighbour inspection.
//! 5. [`probe`] trains per-property sigmoid probes with learned layer/topic
//!    attention and reports macro-F1.
//!
//! [`synth`] generates planted corpora for tests and demos, and [`pipeline`]
//! glues the steps together for the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod corpus;
pub mod encoding;
mod error;
pub mod pipeline;
pub mod probe;
pub mod seed;
pub mod synth;
pub mod topics;

pub use aggregate::{Variant, VariantMatrix, WordVector};
pub use corpus::{CorpusStore, Mention, MentionIndex, Vocabulary};
pub use encoding::{Encoder, EncodingMode, LayerVectors, ReferenceEncoder, VectorStore};
pub use error::{Error, Result};
pub use probe::{LayerCombiner, PropertyDataset, PropertyProbe, TopicCombiner};
pub use topics::{MentionSample, RelevantTopics, TopicModel, WordTopicImportance};
