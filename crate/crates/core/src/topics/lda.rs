use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::model::TopicModel;
use crate::corpus::{token_frequencies, CorpusStore};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub num_topics: usize,
    pub alpha: f64,
    /// Topic-word prior; `None` means `1 / num_topics`.
    pub beta: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    /// Number of most frequent corpus tokens excluded from sampling.
    pub drop_most_frequent: usize,
    /// Tokens rarer than this are excluded from sampling.
    pub min_token_count: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            num_topics: 25,
            alpha: 0.0001,
            beta: None,
            iterations: 1000,
            seed: 0,
            drop_most_frequent: 100,
            min_token_count: 5,
        }
    }
}

impl LdaConfig {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(1.0 / self.num_topics as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.num_topics < 2 {
            return Err(Error::InvalidArgument("LDA needs at least 2 topics".into()));
        }
        if !(self.alpha > 0.0) || !(self.beta() > 0.0) {
            return Err(Error::InvalidArgument("alpha and beta must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Collapsed Gibbs sampler state.
///
/// Counts are kept as `doc_topic[d * K + k]`, `word_topic[v * K + k]` and
/// `topic_total[k]`; the sampler exposes [`GibbsSampler::sweep`] so callers can
/// inspect the state between sweeps.
pub struct GibbsSampler {
    num_topics: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    vocab: Vec<String>,
    docs: Vec<Vec<u32>>,
    assignments: Vec<Vec<u16>>,
    doc_topic: Vec<u32>,
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
    rng: ChaCha8Rng,
    sweeps: usize,
    weights: Vec<f64>,
}

/// The sampler vocabulary: corpus tokens minus the `drop` most frequent (ties
/// by ascending token) and those with fewer than `min_count` occurrences.
fn sampler_vocabulary(store: &CorpusStore, drop: usize, min_count: u64) -> Vec<String> {
    let mut by_freq: Vec<(&str, u64)> = token_frequencies(store).into_iter().collect();
    by_freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut kept: Vec<String> = by_freq
        .into_iter()
        .skip(drop)
        .filter(|&(_, n)| n >= min_count)
        .map(|(w, _)| w.to_string())
        .collect();
    kept.sort();
    kept
}

impl GibbsSampler {
    pub fn new(store: &CorpusStore, config: &LdaConfig) -> Result<Self> {
        config.validate()?;
        if config.num_topics > usize::from(u16::MAX) {
            return Err(Error::InvalidArgument("too many topics".into()));
        }
        let vocab = sampler_vocabulary(store, config.drop_most_frequent, config.min_token_count);
        let ids: BTreeMap<&str, u32> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
        let docs: Vec<Vec<u32>> = store
            .documents()
            .iter()
            .map(|d| d.tokens().filter_map(|t| ids.get(t).copied()).collect())
            .collect();
        if docs.iter().all(Vec::is_empty) {
            return Err(Error::NoEligibleTokens);
        }

        let k = config.num_topics;
        let mut rng = seed::rng(config.seed);
        let mut doc_topic = vec![0u32; docs.len() * k];
        let mut word_topic = vec![0u32; vocab.len() * k];
        let mut topic_total = vec![0u32; k];
        let assignments = docs
            .iter()
            .enumerate()
            .map(|(d, words)| {
                words
                    .iter()
                    .map(|&v| {
                        let z = rng.random_range(0..k);
                        doc_topic[d * k + z] += 1;
                        word_topic[v as usize * k + z] += 1;
                        topic_total[z] += 1;
                        z as u16
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            num_topics: k,
            alpha: config.alpha,
            beta: config.beta(),
            seed: config.seed,
            vocab,
            docs,
            assignments,
            doc_topic,
            word_topic,
            topic_total,
            rng,
            sweeps: 0,
            weights: vec![0.0; k],
        })
    }

    /// Resamples every token assignment once.
    pub fn sweep(&mut self) {
        let k = self.num_topics;
        let vbeta = self.vocab.len() as f64 * self.beta;
        for (d, words) in self.docs.iter().enumerate() {
            let dt = &mut self.doc_topic[d * k..(d + 1) * k];
            for (slot, &v) in words.iter().enumerate() {
                let old = self.assignments[d][slot] as usize;
                let wt = &mut self.word_topic[v as usize * k..(v as usize + 1) * k];
                dt[old] -= 1;
                wt[old] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (f64::from(dt[t]) + self.alpha) * (f64::from(wt[t]) + self.beta)
                        / (f64::from(self.topic_total[t]) + vbeta);
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.partition_point(|&c| c <= u).min(k - 1);

                dt[new] += 1;
                wt[new] += 1;
                self.topic_total[new] += 1;
                self.assignments[d][slot] = new as u16;
            }
        }
        self.sweeps += 1;
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn doc_topic_counts(&self, doc: usize) -> &[u32] {
        &self.doc_topic[doc * self.num_topics..(doc + 1) * self.num_topics]
    }

    /// Verifies the count matrices against each other and against a recount
    /// of the current assignments. Returns a description of the first
    /// inconsistency found.
    pub fn check_counts(&self) -> std::result::Result<(), String> {
        let k = self.num_topics;
        for (d, words) in self.docs.iter().enumerate() {
            let row_sum: u64 = self.doc_topic_counts(d).iter().map(|&c| u64::from(c)).sum();
            if row_sum != words.len() as u64 {
                return Err(format!(
                    "doc {d}: topic counts sum to {row_sum}, doc has {} tokens",
                    words.len()
                ));
            }
        }
        for t in 0..k {
            let by_doc: u64 = (0..self.docs.len()).map(|d| u64::from(self.doc_topic[d * k + t])).sum();
            let by_word: u64 = (0..self.vocab.len())
                .map(|v| u64::from(self.word_topic[v * k + t]))
                .sum();
            let total = u64::from(self.topic_total[t]);
            if by_doc != by_word || by_word != total {
                return Err(format!(
                    "topic {t}: doc sum {by_doc}, word sum {by_word}, total {total}"
                ));
            }
        }

        let mut doc_topic = vec![0u32; self.doc_topic.len()];
        let mut word_topic = vec![0u32; self.word_topic.len()];
        for (d, (words, zs)) in self.docs.iter().zip(&self.assignments).enumerate() {
            for (&v, &z) in words.iter().zip(zs) {
                doc_topic[d * k + z as usize] += 1;
                word_topic[v as usize * k + z as usize] += 1;
            }
        }
        if doc_topic != self.doc_topic || word_topic != self.word_topic {
            return Err("count matrices disagree with assignments".into());
        }
        Ok(())
    }

    /// Point estimates from the current counts.
    pub fn to_model(&self) -> Result<TopicModel> {
        let k = self.num_topics;
        let v = self.vocab.len();
        let mut phi = vec![0.0; k * v];
        for t in 0..k {
            let denom = f64::from(self.topic_total[t]) + v as f64 * self.beta;
            for w in 0..v {
                phi[t * v + w] = (f64::from(self.word_topic[w * k + t]) + self.beta) / denom;
            }
        }
        let mut doc_topics = vec![0.0; self.docs.len() * k];
        for (d, words) in self.docs.iter().enumerate() {
            let denom = words.len() as f64 + k as f64 * self.alpha;
            for t in 0..k {
                doc_topics[d * k + t] = (f64::from(self.doc_topic[d * k + t]) + self.alpha) / denom;
            }
        }
        TopicModel::from_parts(
            k,
            self.alpha,
            self.beta,
            self.seed,
            self.sweeps,
            self.vocab.clone(),
            phi,
            doc_topics,
        )
    }
}

/// Fits LDA by collapsed Gibbs sampling; the final-state counts give the model.
pub fn fit_lda(store: &CorpusStore, config: &LdaConfig) -> Result<TopicModel> {
    let mut sampler = GibbsSampler::new(store, config)?;
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    log::debug!("lda: {} sweeps over {} documents", sampler.sweeps(), store.len());
    sampler.to_model()
}
