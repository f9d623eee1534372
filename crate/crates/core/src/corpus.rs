//! Corpus ingestion, vocabulary and the word-mention inverted index.
//!
//! Input is one document per line, `name<TAB>text`. Text is split into
//! sentences at `.`, `!` or `?` followed by whitespace; tokens are split on
//! Unicode whitespace, lowercased, and stripped of leading and trailing
//! non-alphanumeric characters. Tokens that become empty are dropped.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub sent_id: u32,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: u32,
    /// The identifier string from the input record.
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flat_map(|s| s.tokens.iter().map(String::as_str))
    }
}

/// Tokenized documents with dense ids in input order. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStore {
    documents: Vec<Document>,
}

impl CorpusStore {
    /// Builds a store from pre-tokenized documents, reassigning dense ids.
    pub fn from_tokenized<I, S>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<Vec<S>>)>,
        S: Into<String>,
    {
        let mut documents = Vec::new();
        for (i, (name, sentences)) in docs.into_iter().enumerate() {
            let sentences: Vec<Sentence> = sentences
                .into_iter()
                .map(|toks| toks.into_iter().map(Into::into).collect::<Vec<String>>())
                .filter(|toks| !toks.is_empty())
                .enumerate()
                .map(|(sent_id, tokens)| Sentence {
                    sent_id: sent_id as u32,
                    tokens,
                })
                .collect();
            if sentences.is_empty() {
                return Err(Error::MalformedRecord {
                    line: i + 1,
                    reason: "document has no tokens".into(),
                });
            }
            for tok in sentences.iter().flat_map(|s| &s.tokens) {
                if tok.chars().any(|c| c.is_whitespace() || c.is_uppercase()) {
                    return Err(Error::MalformedRecord {
                        line: i + 1,
                        reason: format!("token {tok:?} is not lowercase whitespace-free"),
                    });
                }
            }
            documents.push(Document {
                doc_id: i as u32,
                name,
                sentences,
            });
        }
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self { documents })
    }

    /// Parses record-per-line text. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let records: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| (i + 1, line))
            .collect();
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }

        let parsed: Vec<(String, Vec<Vec<String>>)> = records
            .par_iter()
            .map(|&(line, record)| parse_record(line, record))
            .collect::<Result<_>>()?;

        let mut seen = HashSet::with_capacity(parsed.len());
        for (&(line, _), (name, _)) in records.iter().zip(&parsed) {
            if !seen.insert(name.as_str()) {
                return Err(Error::MalformedRecord {
                    line,
                    reason: format!("duplicate document id {name:?}"),
                });
            }
        }

        let documents = parsed
            .into_iter()
            .enumerate()
            .map(|(i, (name, sentences))| Document {
                doc_id: i as u32,
                name,
                sentences: sentences
                    .into_iter()
                    .enumerate()
                    .map(|(j, tokens)| Sentence {
                        sent_id: j as u32,
                        tokens,
                    })
                    .collect(),
            })
            .collect();
        Ok(Self { documents })
    }

    pub fn from_reader<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, doc_id: u32) -> Option<&Document> {
        self.documents.get(doc_id as usize)
    }

    pub fn sentence(&self, doc_id: u32, sent_id: u32) -> Option<&Sentence> {
        self.document(doc_id)?.sentences.get(sent_id as usize)
    }

    pub fn token(&self, doc_id: u32, sent_id: u32, token_index: u32) -> Option<&str> {
        self.sentence(doc_id, sent_id)?
            .tokens
            .get(token_index as usize)
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Document::token_count).sum()
    }
}

/// Reads and tokenizes a corpus file.
pub fn ingest_corpus(path: impl AsRef<Path>) -> Result<CorpusStore> {
    let file = File::open(path.as_ref())?;
    CorpusStore::from_reader(BufReader::new(file))
}

fn parse_record(line: usize, record: &str) -> Result<(String, Vec<Vec<String>>)> {
    let (name, text) = record.split_once('\t').ok_or_else(|| Error::MalformedRecord {
        line,
        reason: "missing tab separator".into(),
    })?;
    let name = name.trim();
    if name.is_empty() {
        return Err(Error::MalformedRecord {
            line,
            reason: "empty document id".into(),
        });
    }
    let sentences = tokenize(text);
    if sentences.is_empty() {
        return Err(Error::MalformedRecord {
            line,
            reason: "document has no tokens".into(),
        });
    }
    Ok((name.to_string(), sentences))
}

/// Splits text into sentences of normalized tokens. Empty sentences are dropped.
pub fn tokenize(text: &str) -> Vec<Vec<String>> {
    split_sentences(text)
        .into_iter()
        .map(|s| s.split_whitespace().filter_map(normalize_token).collect::<Vec<_>>())
        .filter(|toks| !toks.is_empty())
        .collect()
}

fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            if let Some(&(_, next)) = chars.peek() {
                if next.is_whitespace() {
                    let end = i + c.len_utf8();
                    out.push(&text[start..end]);
                    start = end;
                }
            }
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

fn normalize_token(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

/// Words with corpus frequency at least `min_count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub min_count: u64,
    pub entries: BTreeMap<String, u64>,
}

impl Vocabulary {
    pub fn frequency(&self, word: &str) -> Option<u64> {
        self.entries.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }
}

/// Exact token counts over the whole store.
pub fn token_frequencies(store: &CorpusStore) -> HashMap<&str, u64> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in store.documents() {
        for tok in doc.tokens() {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    counts
}

pub fn build_vocabulary(store: &CorpusStore, min_count: u64) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    let entries = token_frequencies(store)
        .into_iter()
        .filter(|&(_, n)| n >= min_count)
        .map(|(w, n)| (w.to_string(), n))
        .collect();
    Ok(Vocabulary { min_count, entries })
}

/// One occurrence of an indexed word. The word itself is the posting key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mention {
    pub mention_id: u64,
    pub doc_id: u32,
    pub sent_id: u32,
    pub token_index: u32,
}

impl Mention {
    /// Corpus position, used for ordering and duplicate detection.
    pub fn position(&self) -> (u32, u32, u32) {
        (self.doc_id, self.sent_id, self.token_index)
    }
}

/// Word → mentions in corpus order. Mention ids are dense, assigned in corpus
/// traversal order over indexed words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionIndex {
    words: Vec<String>,
    slots: BTreeMap<String, usize>,
    postings: Vec<Vec<Mention>>,
    // mention_id -> (word slot, position in postings)
    by_id: Vec<(u32, u32)>,
}

pub fn build_mention_index(store: &CorpusStore, vocab: &Vocabulary) -> Result<MentionIndex> {
    let slots: BTreeMap<String, usize> = vocab.entries.keys().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let words: Vec<String> = vocab.entries.keys().cloned().collect();
    let mut postings: Vec<Vec<Mention>> = vocab
        .entries
        .values()
        .map(|&n| Vec::with_capacity(n as usize))
        .collect();
    let mut by_id = Vec::with_capacity(vocab.total() as usize);

    for doc in store.documents() {
        for sent in &doc.sentences {
            for (t, tok) in sent.tokens.iter().enumerate() {
                if let Some(&slot) = slots.get(tok.as_str()) {
                    let mention_id = by_id.len() as u64;
                    by_id.push((slot as u32, postings[slot].len() as u32));
                    postings[slot].push(Mention {
                        mention_id,
                        doc_id: doc.doc_id,
                        sent_id: sent.sent_id,
                        token_index: t as u32,
                    });
                }
            }
        }
    }

    for (word, list) in words.iter().zip(&postings) {
        let expected = vocab.entries[word];
        if list.len() as u64 != expected {
            return Err(Error::VocabularyMismatch {
                word: word.clone(),
                expected,
                found: list.len() as u64,
            });
        }
    }

    Ok(MentionIndex {
        words,
        slots,
        postings,
        by_id,
    })
}

#[derive(Serialize, Deserialize)]
struct PostingLine {
    word: String,
    mentions: Vec<[u64; 4]>,
}

impl MentionIndex {
    pub fn postings(&self, word: &str) -> Option<&[Mention]> {
        self.slots.get(word).map(|&s| self.postings[s].as_slice())
    }

    /// N_w, the number of mentions of `word`.
    pub fn frequency(&self, word: &str) -> Option<usize> {
        self.postings(word).map(<[Mention]>::len)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.slots.contains_key(word)
    }

    /// Looks a mention up by id, returning its word too.
    pub fn mention(&self, mention_id: u64) -> Option<(&str, &Mention)> {
        let &(slot, pos) = self.by_id.get(mention_id as usize)?;
        let slot = slot as usize;
        Some((&self.words[slot], &self.postings[slot][pos as usize]))
    }

    /// Indexed words in lexical order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Mention])> {
        self.words
            .iter()
            .zip(&self.postings)
            .map(|(w, p)| (w.as_str(), p.as_slice()))
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn total_mentions(&self) -> usize {
        self.by_id.len()
    }

    /// Checks that every mention dereferences to a token equal to its word.
    pub fn verify(&self, store: &CorpusStore) -> Result<()> {
        for (word, list) in self.iter() {
            for m in list {
                match store.token(m.doc_id, m.sent_id, m.token_index) {
                    Some(tok) if tok == word => {}
                    other => {
                        return Err(Error::DanglingMention {
                            mention_id: m.mention_id,
                            reason: format!("expected {word:?}, found {other:?}"),
                        })
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes one JSON line per word, in lexical word order.
    pub fn write_jsonl<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        for (word, list) in self.iter() {
            let line = PostingLine {
                word: word.to_string(),
                mentions: list
                    .iter()
                    .map(|m| {
                        [
                            m.mention_id,
                            u64::from(m.doc_id),
                            u64::from(m.sent_id),
                            u64::from(m.token_index),
                        ]
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<Mention>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: PostingLine = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
            let narrow = |v: u64| {
                u32::try_from(v).map_err(|_| Error::MalformedRecord {
                    line: i + 1,
                    reason: format!("value {v} out of range"),
                })
            };
            let mentions = parsed
                .mentions
                .iter()
                .map(|&[id, d, s, t]| {
                    Ok(Mention {
                        mention_id: id,
                        doc_id: narrow(d)?,
                        sent_id: narrow(s)?,
                        token_index: narrow(t)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if entries.insert(parsed.word.clone(), mentions).is_some() {
                return Err(Error::MalformedRecord {
                    line: i + 1,
                    reason: format!("duplicate word {:?}", parsed.word),
                });
            }
        }

        let total: usize = entries.values().map(Vec::len).sum();
        let mut by_id = vec![(u32::MAX, u32::MAX); total];
        let mut words = Vec::with_capacity(entries.len());
        let mut slots = BTreeMap::new();
        let mut postings = Vec::with_capacity(entries.len());
        for (slot, (word, list)) in entries.into_iter().enumerate() {
            if list.windows(2).any(|w| w[0].position() >= w[1].position()) {
                return Err(Error::Format(format!("postings for {word:?} not in corpus order")));
            }
            for (pos, m) in list.iter().enumerate() {
                let cell = by_id
                    .get_mut(m.mention_id as usize)
                    .ok_or_else(|| Error::Format(format!("mention id {} not dense", m.mention_id)))?;
                if cell.0 != u32::MAX {
                    return Err(Error::Format(format!("duplicate mention id {}", m.mention_id)));
                }
                *cell = (slot as u32, pos as u32);
            }
            slots.insert(word.clone(), slot);
            words.push(word);
            postings.push(list);
        }
        Ok(Self {
            words,
            slots,
            postings,
            by_id,
        })
    }
}
