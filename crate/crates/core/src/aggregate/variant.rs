use std::collections::BTreeMap;

use super::{aggregate_mentions, LayerSelect, Pca, SampleFamily, Variant, WordVector};
use crate::encoding::VectorStore;
use crate::error::{Error, Result};
use crate::topics::{MentionSample, RelevantTopics, SampleSource};

/// Everything sampled for one word: its relevant topics, the random sample and
/// one topic sample per relevant topic (same order as `relevant.topics`).
#[derive(Debug, Clone, PartialEq)]
pub struct WordSamples {
    pub word: String,
    pub relevant: RelevantTopics,
    pub random: MentionSample,
    pub topics: Vec<MentionSample>,
}

fn mention_vector(store: &VectorStore, id: u64, select: LayerSelect) -> Result<Vec<f64>> {
    let widen = |s: &[f32]| s.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>();
    match select {
        LayerSelect::Output => store
            .layer(id, store.layer_count() - 1)
            .map(widen)
            .ok_or(Error::MissingVector(id)),
        LayerSelect::Input => store.layer(id, 0).map(widen).ok_or(Error::MissingVector(id)),
        LayerSelect::Mean => {
            let mut mean = vec![0.0; store.dim()];
            for layer in store.layers(id).ok_or(Error::MissingVector(id))? {
                for (m, &x) in mean.iter_mut().zip(layer) {
                    *m += f64::from(x);
                }
            }
            let n = store.layer_count() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            Ok(mean)
        }
        LayerSelect::All => Err(Error::InvalidArgument("per-layer selection needs a layer index".into())),
    }
}

fn aggregate_sample(store: &VectorStore, sample: &MentionSample, select: LayerSelect) -> Result<Vec<f64>> {
    if sample.mentions.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "empty {} sample for {:?}",
            sample.source, sample.word
        )));
    }
    let vectors = sample
        .mentions
        .iter()
        .map(|m| mention_vector(store, m.mention_id, select))
        .collect::<Result<Vec<_>>>()?;
    aggregate_mentions(&vectors)
}

fn topic_vectors(samples: &WordSamples, store: &VectorStore, select: LayerSelect) -> Result<Vec<(u32, Vec<f64>)>> {
    if samples.relevant.topics.is_empty() {
        return Err(Error::EmptyRelevantTopics(samples.word.clone()));
    }
    if samples.topics.len() != samples.relevant.topics.len() {
        return Err(Error::InvalidArgument(format!(
            "{:?} has {} relevant topics but {} topic samples",
            samples.word,
            samples.relevant.topics.len(),
            samples.topics.len()
        )));
    }
    samples
        .relevant
        .topics
        .iter()
        .zip(&samples.topics)
        .map(|(&t, sample)| {
            if sample.source != SampleSource::Topic(t) {
                return Err(Error::InvalidArgument(format!(
                    "sample for topic {t} of {:?} has source {}",
                    samples.word, sample.source
                )));
            }
            Ok((t, aggregate_sample(store, sample, select)?))
        })
        .collect()
}

/// Builds the vectors of `variant` for one word: one vector for `C_*` and
/// `A_*`, `L + 1` per-layer vectors for `C_all`, one per relevant topic for
/// `T_*`.
pub fn build_variant(samples: &WordSamples, variant: Variant, store: &VectorStore) -> Result<Vec<WordVector>> {
    if store.mode() != variant.mode() {
        return Err(Error::InvalidArgument(format!(
            "{variant} needs a {} store, got {}",
            variant.mode(),
            store.mode()
        )));
    }
    let word = &samples.word;
    let make = |topic_id, layer_index, values| WordVector {
        word: word.clone(),
        variant,
        topic_id,
        layer_index,
        values,
    };
    match (variant.family(), variant.layers()) {
        (SampleFamily::Random, LayerSelect::All) => {
            if samples.random.mentions.is_empty() {
                return Err(Error::InvalidArgument(format!("empty random sample for {word:?}")));
            }
            (0..store.layer_count())
                .map(|l| {
                    let per_mention = samples
                        .random
                        .mentions
                        .iter()
                        .map(|m| {
                            store
                                .layer(m.mention_id, l)
                                .map(|s| s.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>())
                                .ok_or(Error::MissingVector(m.mention_id))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(make(None, Some(l as u32), aggregate_mentions(&per_mention)?))
                })
                .collect()
        }
        (SampleFamily::Random, select) => Ok(vec![make(
            None,
            None,
            aggregate_sample(store, &samples.random, select)?,
        )]),
        (SampleFamily::Topic, select) => Ok(topic_vectors(samples, store, select)?
            .into_iter()
            .map(|(t, v)| make(Some(t), None, v))
            .collect()),
        (SampleFamily::TopicAverage, select) => {
            let vectors: Vec<Vec<f64>> = topic_vectors(samples, store, select)?
                .into_iter()
                .map(|(_, v)| v)
                .collect();
            Ok(vec![make(None, None, aggregate_mentions(&vectors)?)])
        }
    }
}

/// Vectors of one variant for a list of words, `slots` vectors per word:
/// 1 for single-vector variants, `L + 1` for `C_all`, `K` for `T_*` with
/// all-zero slots for topics outside a word's relevant set.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantMatrix {
    variant: Variant,
    dim: usize,
    slots: usize,
    words: Vec<String>,
    data: Vec<f64>,
    relevant_topics: BTreeMap<String, Vec<u32>>,
}

impl VariantMatrix {
    /// Assembles a matrix from word vectors. Words are ordered lexically.
    /// `slots` must be the topic count for `T_*` and the layer count for
    /// `C_all`; it is ignored otherwise.
    pub fn from_vectors(variant: Variant, slots: usize, vectors: &[WordVector]) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyMatrix)?;
        let dim = first.values.len();
        let slots = match variant.family() {
            SampleFamily::Topic => slots,
            _ if variant.layers() == LayerSelect::All => slots,
            _ => 1,
        };
        if slots == 0 {
            return Err(Error::InvalidArgument("slot count must be positive".into()));
        }

        let mut by_word: BTreeMap<&str, Vec<&WordVector>> = BTreeMap::new();
        for v in vectors {
            if v.variant != variant {
                return Err(Error::InvalidArgument(format!(
                    "{} vector in a {variant} matrix",
                    v.variant
                )));
            }
            if v.values.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.values.len(),
                });
            }
            by_word.entry(v.word.as_str()).or_default().push(v);
        }

        let mut words = Vec::with_capacity(by_word.len());
        let mut data = vec![0.0; by_word.len() * slots * dim];
        let mut relevant_topics = BTreeMap::new();
        for (i, (word, list)) in by_word.into_iter().enumerate() {
            let mut filled = vec![false; slots];
            let mut topics = Vec::new();
            for v in list {
                let slot = match variant.family() {
                    SampleFamily::Topic => {
                        let t = v.topic_id.ok_or_else(|| {
                            Error::InvalidArgument(format!("{variant} vector for {word:?} lacks a topic"))
                        })?;
                        topics.push(t);
                        t as usize
                    }
                    _ if slots > 1 => v
                        .layer_index
                        .ok_or_else(|| Error::InvalidArgument(format!("{variant} vector for {word:?} lacks a layer")))?
                        as usize,
                    _ => 0,
                };
                if slot >= slots {
                    return Err(Error::InvalidArgument(format!("slot {slot} out of range for {word:?}")));
                }
                if std::mem::replace(&mut filled[slot], true) {
                    return Err(Error::InvalidArgument(format!("duplicate slot {slot} for {word:?}")));
                }
                let start = (i * slots + slot) * dim;
                data[start..start + dim].copy_from_slice(&v.values);
            }
            if variant.family() != SampleFamily::Topic && filled.iter().any(|f| !f) {
                return Err(Error::InvalidArgument(format!("missing vectors for {word:?}")));
            }
            if variant.family() == SampleFamily::Topic {
                relevant_topics.insert(word.to_string(), topics);
            }
            words.push(word.to_string());
        }
        Ok(Self {
            variant,
            dim,
            slots,
            words,
            data,
            relevant_topics,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.words.binary_search_by(|w| w.as_str().cmp(word)).ok()
    }

    /// All slots of row `i`, `slots × dim` values.
    pub fn row(&self, i: usize) -> &[f64] {
        let width = self.slots * self.dim;
        &self.data[i * width..(i + 1) * width]
    }

    pub fn slot(&self, i: usize, slot: usize) -> &[f64] {
        let start = (i * self.slots + slot) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// `T_w` for topic variants, in importance order.
    pub fn relevant_topics(&self, word: &str) -> Option<&[u32]> {
        self.relevant_topics.get(word).map(Vec::as_slice)
    }

    /// Whether slot `slot` of row `i` carries a vector (always, except topic
    /// slots outside the word's relevant set).
    pub fn is_filled(&self, i: usize, slot: usize) -> bool {
        match self.variant.family() {
            SampleFamily::Topic => self.relevant_topics[&self.words[i]].contains(&(slot as u32)),
            _ => true,
        }
    }

    /// Back to a flat list of word vectors, skipping unfilled slots.
    pub fn to_vectors(&self) -> Vec<WordVector> {
        let mut out = Vec::new();
        for (i, word) in self.words.iter().enumerate() {
            for s in 0..self.slots {
                if !self.is_filled(i, s) {
                    continue;
                }
                let (topic_id, layer_index) = match self.variant.family() {
                    SampleFamily::Topic => (Some(s as u32), None),
                    _ if self.slots > 1 => (None, Some(s as u32)),
                    _ => (None, None),
                };
                out.push(WordVector {
                    word: word.clone(),
                    variant: self.variant,
                    topic_id,
                    layer_index,
                    values: self.slot(i, s).to_vec(),
                });
            }
        }
        out
    }

    /// Applies `f` to every filled slot, producing vectors of dimension `dim`.
    /// Unfilled slots stay zero.
    pub fn map_filled<F>(&self, dim: usize, mut f: F) -> Self
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut data = vec![0.0; self.words.len() * self.slots * dim];
        for i in 0..self.words.len() {
            for s in 0..self.slots {
                if self.is_filled(i, s) {
                    let start = (i * self.slots + s) * dim;
                    data[start..start + dim].copy_from_slice(&f(self.slot(i, s)));
                }
            }
        }
        Self {
            variant: self.variant,
            dim,
            slots: self.slots,
            words: self.words.clone(),
            data,
            relevant_topics: self.relevant_topics.clone(),
        }
    }

    /// Fits one PCA on every filled slot vector and projects them all;
    /// unfilled topic slots stay exactly zero.
    pub fn pca_reduce(&self, target_dim: usize) -> Result<(Self, Pca)> {
        let pca = Pca::fit(&self.filled_vectors(), target_dim)?;
        let reduced = self.map_filled(target_dim, |v| pca.transform(v));
        Ok((reduced, pca))
    }

    /// Every filled slot vector, in row then slot order.
    pub fn filled_vectors(&self) -> Vec<&[f64]> {
        (0..self.words.len())
            .flat_map(|i| (0..self.slots).map(move |s| (i, s)))
            .filter(|&(i, s)| self.is_filled(i, s))
            .map(|(i, s)| self.slot(i, s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Mention;
    use crate::encoding::{EncodingMode, LayerVectors};

    fn mention(id: u64) -> Mention {
        Mention {
            mention_id: id,
            doc_id: id as u32,
            sent_id: 0,
            token_index: 0,
        }
    }

    fn sample(source: SampleSource, ids: &[u64]) -> MentionSample {
        MentionSample {
            word: "w".into(),
            source,
            mentions: ids.iter().map(|&i| mention(i)).collect(),
            n_requested: ids.len(),
        }
    }

    fn masked_store(vectors: &[(u64, [f32; 2])]) -> VectorStore {
        let mut s = VectorStore::new(2, 1, EncodingMode::Masked).unwrap();
        for (id, v) in vectors {
            s.insert(LayerVectors {
                mention_id: *id,
                mode: EncodingMode::Masked,
                layers: vec![v.to_vec()],
            })
            .unwrap();
        }
        s
    }

    fn samples(topics: &[u32], topic_ids: &[&[u64]]) -> WordSamples {
        WordSamples {
            word: "w".into(),
            relevant: RelevantTopics {
                word: "w".into(),
                topics: topics.to_vec(),
                cumulative: 0.7,
            },
            random: sample(SampleSource::Random, &[0, 1, 2]),
            topics: topics
                .iter()
                .zip(topic_ids)
                .map(|(&t, ids)| sample(SampleSource::Topic(t), ids))
                .collect(),
        }
    }

    #[test]
    fn average_of_orthogonal_topic_vectors() {
        let store = masked_store(&[(0, [1.0, 0.0]), (1, [1.0, 0.0]), (2, [0.0, 1.0])]);
        let s = samples(&[3, 1], &[&[0, 1], &[2]]);
        let t = build_variant(&s, Variant::TMask, &store).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!((t[0].topic_id, t[0].values.clone()), (Some(3), vec![1.0, 0.0]));
        let a = build_variant(&s, Variant::AMask, &store).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a[0].values[0] - h).abs() < 1e-15 && (a[0].values[1] - h).abs() < 1e-15);
    }

    #[test]
    fn single_topic_average_is_that_topic() {
        let store = masked_store(&[(0, [0.6, 0.8]), (1, [0.0, 1.0])]);
        let s = samples(&[0], &[&[0, 1]]);
        let t = build_variant(&s, Variant::TMask, &store).unwrap();
        let a = build_variant(&s, Variant::AMask, &store).unwrap();
        assert_eq!(t[0].values, a[0].values);
    }

    #[test]
    fn errors_for_missing_inputs() {
        let store = masked_store(&[(0, [1.0, 0.0])]);
        let s = samples(&[0], &[&[0, 9]]);
        assert!(matches!(
            build_variant(&s, Variant::TMask, &store),
            Err(Error::MissingVector(9))
        ));
        let s = samples(&[], &[]);
        assert!(matches!(
            build_variant(&s, Variant::AMask, &store),
            Err(Error::EmptyRelevantTopics(_))
        ));
        assert!(build_variant(&s, Variant::CLast, &store).is_err());
    }

    #[test]
    fn matrix_zero_rows_off_relevant_topics() {
        let vs = vec![
            WordVector {
                word: "b".into(),
                variant: Variant::TMask,
                topic_id: Some(2),
                layer_index: None,
                values: vec![1.0, 0.0],
            },
            WordVector {
                word: "a".into(),
                variant: Variant::TMask,
                topic_id: Some(0),
                layer_index: None,
                values: vec![0.0, 1.0],
            },
        ];
        let m = VariantMatrix::from_vectors(Variant::TMask, 3, &vs).unwrap();
        assert_eq!(m.words(), ["a", "b"]);
        assert_eq!(m.row(0), [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.row(1), [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(m.relevant_topics("b"), Some(&[2u32][..]));
        assert_eq!(m.filled_vectors().len(), 2);
        let mut back = m.to_vectors();
        back.sort_by(|x, y| y.word.cmp(&x.word));
        assert_eq!(back, vs);
    }
}
