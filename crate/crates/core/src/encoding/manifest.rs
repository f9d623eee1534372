use std::io::{BufRead, BufWriter, Write};

use serde::{Deserialize, Serialize};

use super::{EncodeRequest, EncodingMode};
use crate::corpus::CorpusStore;
use crate::error::{Error, Result};
use crate::topics::{MentionSample, SampleSource};

/// One mention to encode, as consumed by external extractors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub mention_id: u64,
    pub word: String,
    pub tokens: Vec<String>,
    pub token_index: usize,
    pub mode: EncodingMode,
    pub topic_id: SampleSource,
}

impl ManifestEntry {
    pub fn request(&self) -> EncodeRequest {
        EncodeRequest {
            mention_id: self.mention_id,
            tokens: self.tokens.clone(),
            token_index: self.token_index,
            mode: self.mode,
        }
    }
}

/// One entry per sampled mention, in sample order. A mention drawn by two
/// samples appears twice, once per source.
pub fn emit_manifest(samples: &[MentionSample], store: &CorpusStore, mode: EncodingMode) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::with_capacity(samples.iter().map(|s| s.mentions.len()).sum());
    for sample in samples {
        for m in &sample.mentions {
            let sentence = store
                .sentence(m.doc_id, m.sent_id)
                .ok_or_else(|| Error::DanglingMention {
                    mention_id: m.mention_id,
                    reason: format!("no sentence {} in document {}", m.sent_id, m.doc_id),
                })?;
            match sentence.tokens.get(m.token_index as usize) {
                Some(tok) if *tok == sample.word => {}
                other => {
                    return Err(Error::DanglingMention {
                        mention_id: m.mention_id,
                        reason: format!("expected {:?} at token {}, found {other:?}", sample.word, m.token_index),
                    })
                }
            }
            out.push(ManifestEntry {
                mention_id: m.mention_id,
                word: sample.word.clone(),
                tokens: sentence.tokens.clone(),
                token_index: m.token_index as usize,
                mode,
                topic_id: sample.source,
            });
        }
    }
    Ok(out)
}

pub fn write_manifest<W: Write>(entries: &[ManifestEntry], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest<R: BufRead>(reader: R) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if entry.token_index >= entry.tokens.len() {
            return Err(Error::MalformedRecord {
                line: i + 1,
                reason: "token_index out of range".into(),
            });
        }
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_mention_index, build_vocabulary};
    use crate::topics::{select_random_mentions, select_topic_mentions, TopicModel};

    #[test]
    fn entries_follow_samples() {
        let text: String = (0..120).map(|i| format!("d{i}\tw in doc {i}\n")).collect();
        let store = CorpusStore::parse(&text).unwrap();
        let vocab = build_vocabulary(&store, 1).unwrap();
        let index = build_mention_index(&store, &vocab).unwrap();
        let model = TopicModel::from_parts(2, 0.1, 0.1, 0, 1, vec![], vec![], vec![0.5; 240]).unwrap();
        let a = select_topic_mentions(&index, &model, "w", 0, 100).unwrap();
        let b = select_random_mentions(&index, "w", 100, 3).unwrap();
        let entries = emit_manifest(&[a, b], &store, EncodingMode::Masked).unwrap();
        assert_eq!(entries.len(), 200);

        let shared = entries[0].mention_id;
        let sources: Vec<_> = entries
            .iter()
            .filter(|e| e.mention_id == shared)
            .map(|e| e.topic_id)
            .collect();
        if sources.len() == 2 {
            assert_eq!(sources, [SampleSource::Topic(0), SampleSource::Random]);
        }

        let mut buf = Vec::new();
        write_manifest(&entries, &mut buf).unwrap();
        let first = std::str::from_utf8(&buf).unwrap().lines().next().unwrap().to_string();
        assert_eq!(
            first,
            r#"{"mention_id":0,"word":"w","tokens":["w","in","doc","0"],"token_index":0,"mode":"masked","topic_id":0}"#
        );
        assert_eq!(read_manifest(buf.as_slice()).unwrap(), entries);
    }

    #[test]
    fn same_mention_in_two_topics() {
        let store = CorpusStore::parse("a\tthe cat sat\n").unwrap();
        let vocab = build_vocabulary(&store, 1).unwrap();
        let index = build_mention_index(&store, &vocab).unwrap();
        let model = TopicModel::from_parts(2, 0.1, 0.1, 0, 1, vec![], vec![], vec![0.5, 0.5]).unwrap();
        let s0 = select_topic_mentions(&index, &model, "cat", 0, 5).unwrap();
        let s1 = select_topic_mentions(&index, &model, "cat", 1, 5).unwrap();
        let entries = emit_manifest(&[s0, s1], &store, EncodingMode::Unmasked).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].mention_id, entries[1].mention_id);
        assert_eq!(entries[0].topic_id, SampleSource::Topic(0));
        assert_eq!(entries[1].topic_id, SampleSource::Topic(1));
    }

    #[test]
    fn empty_and_dangling() {
        let store = CorpusStore::parse("a\tthe cat sat\n").unwrap();
        assert!(emit_manifest(&[], &store, EncodingMode::Masked).unwrap().is_empty());

        let other = CorpusStore::parse("a\tthe dog sat\n").unwrap();
        let vocab = build_vocabulary(&other, 1).unwrap();
        let index = build_mention_index(&other, &vocab).unwrap();
        let mut s = select_random_mentions(&index, "dog", 1, 0).unwrap();
        assert!(matches!(
            emit_manifest(&[s.clone()], &store, EncodingMode::Masked),
            Err(Error::DanglingMention { .. })
        ));
        s.mentions[0].sent_id = 9;
        assert!(matches!(
            emit_manifest(&[s], &other, EncodingMode::Masked),
            Err(Error::DanglingMention { .. })
        ));
    }
}
