use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::model::TopicModel;
use crate::corpus::{Mention, MentionIndex};
use crate::error::{Error, Result};
use crate::seed;

/// Where a sample came from: a topic's ranked documents, or uniform sampling.
///
/// Serializes as the topic id, or the string `"RANDOM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SampleSource {
    Topic(u32),
    Random,
}

impl fmt::Display for SampleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Topic(t) => write!(f, "{t}"),
            Self::Random => f.write_str("RANDOM"),
        }
    }
}

impl Serialize for SampleSource {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Topic(t) => s.serialize_u32(*t),
            Self::Random => s.serialize_str("RANDOM"),
        }
    }
}

impl<'de> Deserialize<'de> for SampleSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Id(u32),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Id(t) => Ok(Self::Topic(t)),
            Raw::Name(s) if s == "RANDOM" => Ok(Self::Random),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("bad topic id {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionSample {
    pub word: String,
    pub source: SampleSource,
    pub mentions: Vec<Mention>,
    pub n_requested: usize,
}

/// Documents mentioning `word`, ranked by τ_topic(d) (ties by ascending doc
/// id), contribute every sentence mentioning `word` in corpus order until `n`
/// sentences are collected. Repeats within a sentence yield only the first
/// occurrence.
pub fn select_topic_mentions(
    index: &MentionIndex,
    model: &TopicModel,
    word: &str,
    topic: u32,
    n: usize,
) -> Result<MentionSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    if topic as usize >= model.num_topics() {
        return Err(Error::InvalidArgument(format!(
            "topic {topic} out of range for a {}-topic model",
            model.num_topics()
        )));
    }
    let postings = index
        .postings(word)
        .ok_or_else(|| Error::UnknownWord(word.to_string()))?;

    // Postings are in corpus order, so each document's mentions are contiguous.
    let mut groups: Vec<(u32, f64, &[Mention])> = Vec::new();
    let mut start = 0;
    while start < postings.len() {
        let doc = postings[start].doc_id;
        let end = start + postings[start..].iter().take_while(|m| m.doc_id == doc).count();
        let score = model
            .try_doc_topics(doc)
            .ok_or_else(|| Error::InvalidArgument(format!("document {doc} outside the topic model")))?[topic as usize];
        groups.push((doc, score, &postings[start..end]));
        start = end;
    }
    groups.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut mentions = Vec::with_capacity(n.min(postings.len()));
    'docs: for (_, _, list) in groups {
        let mut last_sentence = None;
        for m in list {
            if last_sentence == Some(m.sent_id) {
                continue;
            }
            last_sentence = Some(m.sent_id);
            mentions.push(*m);
            if mentions.len() == n {
                break 'docs;
            }
        }
    }
    Ok(MentionSample {
        word: word.to_string(),
        source: SampleSource::Topic(topic),
        mentions,
        n_requested: n,
    })
}

/// Uniform sample without replacement over all mentions of `word`, returned
/// in corpus order.
pub fn select_random_mentions(index: &MentionIndex, word: &str, n: usize, seed: u64) -> Result<MentionSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let postings = index
        .postings(word)
        .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
    let mentions = if n >= postings.len() {
        postings.to_vec()
    } else {
        let mut rng = seed::rng(seed);
        let mut picked = index::sample(&mut rng, postings.len(), n).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| postings[i]).collect()
    };
    Ok(MentionSample {
        word: word.to_string(),
        source: SampleSource::Random,
        mentions,
        n_requested: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_mention_index, build_vocabulary, CorpusStore};

    fn fixture(text: &str, doc_topics: Vec<f64>) -> (MentionIndex, TopicModel) {
        let store = CorpusStore::parse(text).unwrap();
        let vocab = build_vocabulary(&store, 1).unwrap();
        let index = build_mention_index(&store, &vocab).unwrap();
        let model = TopicModel::from_parts(2, 0.1, 0.1, 0, 1, vec![], vec![], doc_topics).unwrap();
        (index, model)
    }

    fn positions(s: &MentionSample) -> Vec<(u32, u32)> {
        s.mentions.iter().map(|m| (m.doc_id, m.sent_id)).collect()
    }

    #[test]
    fn ranked_documents_are_walked_in_order() {
        // doc 0 (B): tau_0 = 0.5, 4 sentences with w; doc 1 (A): tau_0 = 0.9, 3 sentences.
        let text = "B\tw a. w b. w c. w d.\nA\tw e. w f. w g.\n";
        let (index, model) = fixture(text, vec![0.5, 0.5, 0.9, 0.1]);
        let s = select_topic_mentions(&index, &model, "w", 0, 5).unwrap();
        assert_eq!(positions(&s), [(1, 0), (1, 1), (1, 2), (0, 0), (0, 1)]);
        assert_eq!(s.source, SampleSource::Topic(0));

        let all = select_topic_mentions(&index, &model, "w", 0, 100).unwrap();
        assert_eq!(all.mentions.len(), 7);
        assert_eq!(all.n_requested, 100);
    }

    #[test]
    fn equal_scores_prefer_lower_doc_id() {
        let (index, model) = fixture("a\tw x\nb\tw y\n", vec![0.5, 0.5, 0.5, 0.5]);
        let s = select_topic_mentions(&index, &model, "w", 1, 1).unwrap();
        assert_eq!(positions(&s), [(0, 0)]);
    }

    #[test]
    fn repeats_within_a_sentence_count_once() {
        let (index, model) = fixture("a\tw w w. x w\n", vec![0.5, 0.5]);
        let s = select_topic_mentions(&index, &model, "w", 0, 10).unwrap();
        let tokens: Vec<_> = s.mentions.iter().map(|m| (m.sent_id, m.token_index)).collect();
        assert_eq!(tokens, [(0, 0), (1, 1)]);
    }

    #[test]
    fn unknown_words_and_bad_topics() {
        let (index, model) = fixture("a\tw\n", vec![0.5, 0.5]);
        assert!(matches!(
            select_topic_mentions(&index, &model, "q", 0, 1),
            Err(Error::UnknownWord(_))
        ));
        assert!(select_topic_mentions(&index, &model, "w", 2, 1).is_err());
        assert!(matches!(
            select_random_mentions(&index, "q", 1, 0),
            Err(Error::UnknownWord(_))
        ));
    }

    #[test]
    fn random_sample_exhausts_small_postings() {
        let text: String = (0..100).map(|i| format!("d{i}\tw\n")).collect();
        let (index, _) = fixture(&text, vec![0.5; 200]);
        let s = select_random_mentions(&index, "w", 500, 1).unwrap();
        assert_eq!(s.mentions.len(), 100);
        let s1 = select_random_mentions(&index, "w", 10, 1).unwrap();
        let s2 = select_random_mentions(&index, "w", 10, 1).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.mentions.windows(2).all(|w| w[0].mention_id < w[1].mention_id));
    }

    #[test]
    fn source_serialization() {
        assert_eq!(serde_json::to_string(&SampleSource::Topic(3)).unwrap(), "3");
        assert_eq!(serde_json::to_string(&SampleSource::Random).unwrap(), "\"RANDOM\"");
        let back: SampleSource = serde_json::from_str("\"RANDOM\"").unwrap();
        assert_eq!(back, SampleSource::Random);
        assert!(serde_json::from_str::<SampleSource>("\"x\"").is_err());
    }
}
