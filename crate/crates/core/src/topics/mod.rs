//! Topic modelling and topic-aware mention selection.
//!
//! [`fit_lda`] runs collapsed Gibbs sampling over the corpus. Per-word topic
//! importance is the mention-weighted mean of the document-topic
//! distributions ([`word_topic_importance`]); the relevant topics of a word are
//! the shortest importance-ranked prefix reaching a cumulative threshold,
//! capped at a maximum count ([`select_relevant_topics`]).

mod importance;
mod lda;
mod model;
mod sampling;

pub use importance::{select_relevant_topics, word_topic_importance, RelevantTopics, WordTopicImportance};
pub use lda::{fit_lda, GibbsSampler, LdaConfig};
pub use model::{ModelHeader, TopicModel, TopicSummary, TopicWord};
pub use sampling::{select_random_mentions, select_topic_mentions, MentionSample, SampleSource};
