//! Planted synthetic corpora.
//!
//! [`planted_topics`] draws documents from known disjoint-vocabulary topics.
//! [`property_corpus`] builds a corpus in which binary word properties are
//! visible only in the sentences of one minority topic, while the remaining
//! mentions sit in generic topics next to word-specific filler.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::corpus::CorpusStore;
use crate::error::Result;
use crate::seed;

pub type TokenizedDoc = (String, Vec<Vec<String>>);

/// Renders documents as `name<TAB>text` lines that re-tokenize to the same
/// sentences.
pub fn render_corpus(docs: &[TokenizedDoc]) -> String {
    let mut out = String::new();
    for (name, sentences) in docs {
        out.push_str(name);
        out.push('\t');
        let text: Vec<String> = sentences.iter().map(|s| s.join(" ") + ".").collect();
        out.push_str(&text.join(" "));
        out.push('\n');
    }
    out
}

/// Renders `word<TAB>label,label` rows.
pub fn render_labels(labels: &BTreeMap<String, BTreeSet<String>>) -> String {
    let mut out = String::new();
    for (word, props) in labels {
        let joined: Vec<&str> = props.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{word}\t{}", joined.join(","));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTopicsConfig {
    pub num_topics: usize,
    pub words_per_topic: usize,
    pub num_docs: usize,
    pub tokens_per_doc: usize,
    pub sentence_len: usize,
    /// Documents mix this many distinct topics at most.
    pub topics_per_doc: usize,
    pub seed: u64,
}

impl Default for PlantedTopicsConfig {
    fn default() -> Self {
        Self {
            num_topics: 5,
            words_per_topic: 20,
            num_docs: 1000,
            tokens_per_doc: 40,
            sentence_len: 10,
            topics_per_doc: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedTopics {
    pub docs: Vec<TokenizedDoc>,
    /// Word distribution of each planted topic.
    pub topics: Vec<BTreeMap<String, f64>>,
}

impl PlantedTopics {
    pub fn store(&self) -> Result<CorpusStore> {
        CorpusStore::from_tokenized(self.docs.clone())
    }
}

/// Topic `k` owns words `t{k}w{i}` with Zipf weights `1/(i+1)`. Each document
/// mixes up to `topics_per_doc` topics with uniform random proportions.
pub fn planted_topics(config: &PlantedTopicsConfig) -> PlantedTopics {
    let mut rng = seed::rng(seed::derive(config.seed, "planted-topics"));
    let weights: Vec<f64> = (0..config.words_per_topic).map(|i| 1.0 / (i + 1) as f64).collect();
    let total: f64 = weights.iter().sum();
    let word_dist = WeightedIndex::new(&weights).expect("positive weights");
    let topics: Vec<BTreeMap<String, f64>> = (0..config.num_topics)
        .map(|k| {
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| (format!("t{k}w{i}"), w / total))
                .collect()
        })
        .collect();

    let all: Vec<usize> = (0..config.num_topics).collect();
    let docs = (0..config.num_docs)
        .map(|d| {
            let n = rng.random_range(1..=config.topics_per_doc.clamp(1, config.num_topics));
            let chosen: Vec<usize> = all.choose_multiple(&mut rng, n).copied().collect();
            let props: Vec<f64> = chosen.iter().map(|_| rng.random_range(0.2..1.0)).collect();
            let topic_dist = WeightedIndex::new(&props).expect("positive proportions");
            let tokens: Vec<String> = (0..config.tokens_per_doc)
                .map(|_| {
                    format!(
                        "t{}w{}",
                        chosen[topic_dist.sample(&mut rng)],
                        word_dist.sample(&mut rng)
                    )
                })
                .collect();
            let sentences = tokens
                .chunks(config.sentence_len.max(1))
                .map(<[String]>::to_vec)
                .collect();
            (format!("doc{d:05}"), sentences)
        })
        .collect();
    PlantedTopics { docs, topics }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCorpusConfig {
    pub num_words: usize,
    pub num_properties: usize,
    pub generic_topics: usize,
    /// Generic topics each target word is spread over.
    pub topics_per_word: usize,
    pub mentions_per_word: usize,
    /// Fraction of each word's mentions placed in the revealing topic.
    pub revealing_share: f64,
    pub sentences_per_doc: usize,
    pub filler_vocab: usize,
    pub fillers_per_sentence: usize,
    /// Word-specific filler tokens added to every generic sentence.
    pub companions_per_sentence: usize,
    pub revealing_fillers_per_sentence: usize,
    pub seed: u64,
}

impl Default for PropertyCorpusConfig {
    fn default() -> Self {
        Self {
            num_words: 120,
            num_properties: 4,
            generic_topics: 8,
            topics_per_word: 6,
            mentions_per_word: 50,
            revealing_share: 0.2,
            sentences_per_doc: 10,
            filler_vocab: 30,
            fillers_per_sentence: 4,
            companions_per_sentence: 3,
            revealing_fillers_per_sentence: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropertyCorpus {
    pub docs: Vec<TokenizedDoc>,
    pub words: Vec<String>,
    pub properties: Vec<String>,
    pub labels: BTreeMap<String, BTreeSet<String>>,
}

impl PropertyCorpus {
    pub fn store(&self) -> Result<CorpusStore> {
        CorpusStore::from_tokenized(self.docs.clone())
    }
}

/// Target words `w{i}` carry each property `prop{j}` with probability 1/2.
///
/// Documents are single-topic. Sentences of the revealing topic hold the
/// target, one cue token per property (`p{j}yes` or `p{j}no`) and shared
/// filler. Generic sentences hold the target, topic filler and the word's own
/// companion tokens.
pub fn property_corpus(config: &PropertyCorpusConfig) -> PropertyCorpus {
    let mut rng = seed::rng(seed::derive(config.seed, "property-corpus"));
    let words: Vec<String> = (0..config.num_words).map(|i| format!("w{i:03}")).collect();
    let properties: Vec<String> = (0..config.num_properties).map(|j| format!("prop{j}")).collect();
    let labels: BTreeMap<String, BTreeSet<String>> = words
        .iter()
        .map(|w| {
            let props = properties.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
            (w.clone(), props)
        })
        .collect();

    // Sentence slots per topic; the revealing topic is index `generic_topics`.
    let revealing = config.generic_topics;
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); config.generic_topics + 1];
    let generic: Vec<usize> = (0..config.generic_topics).collect();
    let n_reveal = (config.mentions_per_word as f64 * config.revealing_share).round() as usize;
    for w in 0..config.num_words {
        slots[revealing].extend(std::iter::repeat_n(w, n_reveal));
        let topics: Vec<usize> = generic
            .choose_multiple(&mut rng, config.topics_per_word.min(config.generic_topics))
            .copied()
            .collect();
        for m in 0..config.mentions_per_word - n_reveal {
            slots[topics[m % topics.len()]].push(w);
        }
    }

    let mut docs = Vec::new();
    for (t, list) in slots.iter_mut().enumerate() {
        list.shuffle(&mut rng);
        for chunk in list.chunks(config.sentences_per_doc.max(1)) {
            let sentences = chunk
                .iter()
                .map(|&w| {
                    let word = &words[w];
                    let mut s = vec![word.clone()];
                    if t == revealing {
                        for (j, p) in properties.iter().enumerate() {
                            let cue = if labels[word].contains(p) { "yes" } else { "no" };
                            s.push(format!("p{j}{cue}"));
                        }
                        for _ in 0..config.revealing_fillers_per_sentence {
                            s.push(format!("rf{}", rng.random_range(0..config.filler_vocab)));
                        }
                    } else {
                        for c in 0..config.companions_per_sentence {
                            s.push(format!("c{w:03}x{c}"));
                        }
                        for _ in 0..config.fillers_per_sentence {
                            s.push(format!("g{t}f{}", rng.random_range(0..config.filler_vocab)));
                        }
                    }
                    s.shuffle(&mut rng);
                    s
                })
                .collect();
            docs.push((String::new(), sentences));
        }
    }
    docs.shuffle(&mut rng);
    for (i, doc) in docs.iter_mut().enumerate() {
        doc.0 = format!("doc{i:05}");
    }
    PropertyCorpus {
        docs,
        words,
        properties,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_corpus_shape() {
        let p = planted_topics(&PlantedTopicsConfig {
            num_docs: 30,
            ..PlantedTopicsConfig::default()
        });
        assert_eq!(p.docs.len(), 30);
        assert_eq!(p.topics.len(), 5);
        for t in &p.topics {
            assert!((t.values().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let store = p.store().unwrap();
        assert_eq!(store.token_count(), 30 * 40);
        assert_eq!(CorpusStore::parse(&render_corpus(&p.docs)).unwrap(), store);
    }

    #[test]
    fn property_corpus_shape() {
        let cfg = PropertyCorpusConfig {
            num_words: 10,
            ..PropertyCorpusConfig::default()
        };
        let c = property_corpus(&cfg);
        let store = c.store().unwrap();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut cue_sentences = 0;
        for doc in store.documents() {
            for s in &doc.sentences {
                let targets: Vec<&String> = s.tokens.iter().filter(|t| c.labels.contains_key(*t)).collect();
                assert_eq!(targets.len(), 1);
                *counts.entry(targets[0]).or_default() += 1;
                if s.tokens.iter().any(|t| t.starts_with('p')) {
                    cue_sentences += 1;
                    let w = targets[0];
                    assert_eq!(s.tokens.contains(&"p0yes".to_string()), c.labels[w].contains("prop0"));
                }
            }
        }
        assert!(counts.values().all(|&n| n == 50));
        assert_eq!(cue_sentences, 10 * 10);
        assert_eq!(CorpusStore::parse(&render_corpus(&c.docs)).unwrap(), store);
        assert!(render_labels(&c.labels).lines().count() == 10);
        let again = property_corpus(&cfg);
        assert_eq!(again.docs, c.docs);
    }
}
