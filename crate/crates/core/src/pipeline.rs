//! End-to-end helpers shared by the command-line tool and integration tests.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{build_variant, SampleFamily, Variant, VariantMatrix, WordSamples};
use crate::corpus::{CorpusStore, MentionIndex};
use crate::encoding::{emit_manifest, Encoder, EncodingMode, ManifestEntry, VectorStore};
use crate::error::{Error, Result};
use crate::probe::{inputs_from_matrix, tune_and_evaluate, EvaluationReport, Grid, PropertyDataset, TrainConfig};
use crate::seed;
use crate::topics::{
    select_random_mentions, select_relevant_topics, select_topic_mentions, word_topic_importance, MentionSample,
    RelevantTopics, SampleSource, TopicModel,
};

/// Mention sampling settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub threshold: f64,
    pub max_topics: usize,
    pub n_random: usize,
    pub n_per_topic: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            threshold: 0.6,
            max_topics: 6,
            n_random: 500,
            n_per_topic: 100,
            seed: 0,
        }
    }
}

/// Relevant topics plus random and per-topic samples for one word. The random
/// sample is seeded by the word, so results do not depend on word order.
pub fn sample_word(
    index: &MentionIndex,
    model: &TopicModel,
    word: &str,
    config: &SamplingConfig,
) -> Result<WordSamples> {
    let importance = word_topic_importance(model, index, word)?;
    let relevant = select_relevant_topics(&importance, config.threshold, config.max_topics)?;
    sample_relevant(index, model, relevant, config)
}

/// Draws the samples for an already selected relevant-topic set.
pub fn sample_relevant(
    index: &MentionIndex,
    model: &TopicModel,
    relevant: RelevantTopics,
    config: &SamplingConfig,
) -> Result<WordSamples> {
    let word = relevant.word.clone();
    let random = select_random_mentions(index, &word, config.n_random, seed::derive(config.seed, &word))?;
    let topics = relevant
        .topics
        .iter()
        .map(|&t| select_topic_mentions(index, model, &word, t, config.n_per_topic))
        .collect::<Result<Vec<_>>>()?;
    Ok(WordSamples {
        word,
        relevant,
        random,
        topics,
    })
}

/// Samples every word in parallel; output follows `words`.
pub fn sample_words(
    index: &MentionIndex,
    model: &TopicModel,
    words: &[String],
    config: &SamplingConfig,
) -> Result<Vec<WordSamples>> {
    words.par_iter().map(|w| sample_word(index, model, w, config)).collect()
}

/// Keeps the indexed words of `candidates`, sorted and deduplicated, warning
/// about the rest.
pub fn indexed_words<'a>(index: &MentionIndex, candidates: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let all: BTreeSet<&str> = candidates.into_iter().collect();
    let kept: Vec<String> = all
        .iter()
        .filter(|w| index.contains(w))
        .map(|w| w.to_string())
        .collect();
    if kept.len() < all.len() {
        log::warn!("{} target words are not in the mention index", all.len() - kept.len());
    }
    kept
}

/// Line of `samples.jsonl`: mention ids only, resolved against the index on
/// read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SampleRecord {
    word: String,
    relevant_topics: Vec<u32>,
    cumulative: f64,
    n_random: usize,
    n_per_topic: usize,
    random: Vec<u64>,
    topics: Vec<Vec<u64>>,
}

pub fn write_samples<W: Write>(samples: &[WordSamples], mut w: W) -> Result<()> {
    for s in samples {
        let record = SampleRecord {
            word: s.word.clone(),
            relevant_topics: s.relevant.topics.clone(),
            cumulative: s.relevant.cumulative,
            n_random: s.random.n_requested,
            n_per_topic: s.topics.first().map_or(0, |t| t.n_requested),
            random: s.random.mentions.iter().map(|m| m.mention_id).collect(),
            topics: s
                .topics
                .iter()
                .map(|t| t.mentions.iter().map(|m| m.mention_id).collect())
                .collect(),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples<R: BufRead>(r: R, index: &MentionIndex) -> Result<Vec<WordSamples>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRecord { line: i + 1, reason };
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if rec.topics.len() != rec.relevant_topics.len() {
            return Err(malformed("topic samples do not match relevant topics".into()));
        }
        let resolve = |ids: &[u64], source: SampleSource, n_requested: usize| -> Result<MentionSample> {
            let mentions = ids
                .iter()
                .map(|&id| match index.mention(id) {
                    Some((word, m)) if word == rec.word => Ok(*m),
                    _ => Err(Error::DanglingMention {
                        mention_id: id,
                        reason: format!("not a mention of {:?}", rec.word),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MentionSample {
                word: rec.word.clone(),
                source,
                mentions,
                n_requested,
            })
        };
        let random = resolve(&rec.random, SampleSource::Random, rec.n_random)?;
        let topics = rec
            .relevant_topics
            .iter()
            .zip(&rec.topics)
            .map(|(&t, ids)| resolve(ids, SampleSource::Topic(t), rec.n_per_topic))
            .collect::<Result<Vec<_>>>()?;
        out.push(WordSamples {
            word: rec.word.clone(),
            relevant: RelevantTopics {
                word: rec.word,
                topics: rec.relevant_topics,
                cumulative: rec.cumulative,
            },
            random,
            topics,
        });
    }
    Ok(out)
}

/// Manifest covering every random and topic sample of `samples`.
pub fn manifest_for(samples: &[WordSamples], store: &CorpusStore, mode: EncodingMode) -> Result<Vec<ManifestEntry>> {
    let flat: Vec<MentionSample> = samples
        .iter()
        .flat_map(|s| std::iter::once(&s.random).chain(&s.topics))
        .cloned()
        .collect();
    emit_manifest(&flat, store, mode)
}

/// Encodes each distinct mention of `entries` once.
pub fn encode_manifest(encoder: &dyn Encoder, entries: &[ManifestEntry]) -> Result<VectorStore> {
    let mode = entries
        .first()
        .map(|e| e.mode)
        .ok_or_else(|| Error::InvalidArgument("empty manifest".into()))?;
    if let Some(e) = entries.iter().find(|e| e.mode != mode) {
        return Err(Error::InvalidArgument(format!(
            "manifest mixes {mode} and {} entries",
            e.mode
        )));
    }
    let mut seen = BTreeSet::new();
    let unique: Vec<&ManifestEntry> = entries.iter().filter(|e| seen.insert(e.mention_id)).collect();
    let encoded = unique
        .par_iter()
        .map(|e| encoder.encode(&e.request()))
        .collect::<Result<Vec<_>>>()?;
    let mut store = VectorStore::new(encoder.dim(), encoder.layer_count(mode), mode)?;
    for v in encoded {
        store.insert(v)?;
    }
    Ok(store)
}

/// Builds the matrix of `variant` for every word of `samples`.
pub fn build_matrix(
    samples: &[WordSamples],
    variant: Variant,
    store: &VectorStore,
    num_topics: usize,
) -> Result<VariantMatrix> {
    let vectors: Vec<_> = samples
        .par_iter()
        .map(|s| build_variant(s, variant, store))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let slots = match variant.family() {
        SampleFamily::Topic => num_topics,
        _ => store.layer_count(),
    };
    VariantMatrix::from_vectors(variant, slots, &vectors)
}

/// Restricts `dataset` to the words of `matrix`, then tunes and evaluates a
/// probe per property.
pub fn evaluate_matrix(
    matrix: &VariantMatrix,
    dataset: &PropertyDataset,
    grid: &Grid,
    config: &TrainConfig,
) -> Result<EvaluationReport> {
    let inputs = inputs_from_matrix(matrix)?;
    let mut dataset = dataset.clone();
    dataset.restrict_to(|w| inputs.contains_key(w))?;
    tune_and_evaluate(matrix.variant().as_str(), &dataset, &inputs, grid, config)
}
