use serde::{Deserialize, Serialize};

use super::model::TopicModel;
use crate::corpus::MentionIndex;
use crate::error::{Error, Result};

/// τ(w): mean of τ(d) over the documents of every mention of `word`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTopicImportance {
    pub word: String,
    pub tau: Vec<f64>,
}

/// Topics relevant to a word, most important first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevantTopics {
    pub word: String,
    pub topics: Vec<u32>,
    pub cumulative: f64,
}

impl RelevantTopics {
    pub fn contains(&self, topic: u32) -> bool {
        self.topics.contains(&topic)
    }

    /// Indicator vector over `num_topics` topics.
    pub fn mask(&self, num_topics: usize) -> Vec<bool> {
        let mut mask = vec![false; num_topics];
        for &t in &self.topics {
            if let Some(m) = mask.get_mut(t as usize) {
                *m = true;
            }
        }
        mask
    }
}

/// Every mention counts once, so a document mentioning `word` twice
/// contributes its topic distribution twice.
pub fn word_topic_importance(model: &TopicModel, index: &MentionIndex, word: &str) -> Result<WordTopicImportance> {
    let postings = index
        .postings(word)
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
    let k = model.num_topics();
    let mut tau = vec![0.0; k];
    for m in postings {
        let doc = model.try_doc_topics(m.doc_id).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "mention {} refers to document {} outside the topic model",
                m.mention_id, m.doc_id
            ))
        })?;
        for (acc, &p) in tau.iter_mut().zip(doc) {
            *acc += p;
        }
    }
    let n = postings.len() as f64;
    tau.iter_mut().for_each(|x| *x /= n);
    Ok(WordTopicImportance {
        word: word.to_string(),
        tau,
    })
}

/// Shortest prefix of topics (descending importance, ties by ascending id)
/// whose cumulative importance reaches `threshold`, truncated to
/// `max_topics`. The cap wins when the two disagree.
pub fn select_relevant_topics(
    importance: &WordTopicImportance,
    threshold: f64,
    max_topics: usize,
) -> Result<RelevantTopics> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} not in (0, 1]")));
    }
    if max_topics == 0 {
        return Err(Error::InvalidArgument("max_topics must be at least 1".into()));
    }
    if importance.tau.is_empty() {
        return Err(Error::EmptyRelevantTopics(importance.word.clone()));
    }
    let tau = &importance.tau;
    let mut order: Vec<usize> = (0..tau.len()).collect();
    order.sort_by(|&a, &b| tau[b].total_cmp(&tau[a]).then(a.cmp(&b)));

    let mut topics = Vec::new();
    let mut cumulative = 0.0;
    for t in order {
        topics.push(t as u32);
        cumulative += tau[t];
        if cumulative >= threshold || topics.len() == max_topics {
            break;
        }
    }
    Ok(RelevantTopics {
        word: importance.word.clone(),
        topics,
        cumulative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_mention_index, build_vocabulary, CorpusStore};

    fn imp(tau: &[f64]) -> WordTopicImportance {
        WordTopicImportance {
            word: "w".into(),
            tau: tau.to_vec(),
        }
    }

    #[test]
    fn importance_counts_every_mention() {
        let store = CorpusStore::parse("d1\tw x\nd2\tw y w\n").unwrap();
        let vocab = build_vocabulary(&store, 1).unwrap();
        let index = build_mention_index(&store, &vocab).unwrap();
        let model = TopicModel::from_parts(2, 0.1, 0.1, 0, 1, vec![], vec![], vec![0.7, 0.3, 0.2, 0.8]).unwrap();
        let t = word_topic_importance(&model, &index, "w").unwrap();
        assert!((t.tau[0] - 1.1 / 3.0).abs() < 1e-15);
        assert!((t.tau[1] - 1.9 / 3.0).abs() < 1e-15);
        assert!((t.tau[0] - 0.3667).abs() < 1e-4 && (t.tau[1] - 0.6333).abs() < 1e-4);

        let single = word_topic_importance(&model, &index, "x").unwrap();
        assert_eq!(single.tau, [0.7, 0.3]);
        assert!(matches!(
            word_topic_importance(&model, &index, "nope"),
            Err(Error::UnknownWord(_))
        ));
    }

    #[test]
    fn uniform_documents_give_uniform_importance() {
        let store = CorpusStore::parse("a\tw w\nb\tw\nc\tv\n").unwrap();
        let vocab = build_vocabulary(&store, 1).unwrap();
        let index = build_mention_index(&store, &vocab).unwrap();
        let model = TopicModel::from_parts(4, 0.1, 0.1, 0, 1, vec![], vec![], vec![0.25; 12]).unwrap();
        let t = word_topic_importance(&model, &index, "w").unwrap();
        assert!(t.tau.iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn threshold_rule() {
        let r = select_relevant_topics(&imp(&[0.5, 0.3, 0.1, 0.05, 0.05]), 0.6, 6).unwrap();
        assert_eq!(r.topics, [0, 1]);
        assert!((r.cumulative - 0.8).abs() < 1e-12);

        let r = select_relevant_topics(&imp(&[0.0, 0.0, 1.0]), 0.6, 6).unwrap();
        assert_eq!(r.topics, [2]);
    }

    #[test]
    fn cap_overrides_threshold() {
        let r = select_relevant_topics(&imp(&[0.04; 25]), 0.6, 6).unwrap();
        assert_eq!(r.topics, [0, 1, 2, 3, 4, 5]);
        assert!((r.cumulative - 0.24).abs() < 1e-12);
    }

    #[test]
    fn ties_broken_by_topic_id() {
        let r = select_relevant_topics(&imp(&[0.1, 0.45, 0.45]), 0.6, 6).unwrap();
        assert_eq!(r.topics, [1, 2]);
    }

    #[test]
    fn bad_parameters() {
        assert!(select_relevant_topics(&imp(&[1.0]), 0.0, 6).is_err());
        assert!(select_relevant_topics(&imp(&[1.0]), 1.5, 6).is_err());
        assert!(select_relevant_topics(&imp(&[1.0]), 0.6, 0).is_err());
    }
}
