use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Metadata written as the JSON header of a persisted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    #[serde(rename = "K")]
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub vocab: Vec<String>,
    pub num_docs: usize,
    /// `[K, V]`, row-major.
    pub phi_dims: [usize; 2],
    /// `[D, K]`, row-major.
    pub doc_topics_dims: [usize; 2],
}

/// Fitted topic-word and document-topic distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    header: ModelHeader,
    phi: Vec<f64>,
    doc_topics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicWord {
    pub word: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic: usize,
    pub words: Vec<TopicWord>,
}

fn check_simplex(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::Format(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Format(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl TopicModel {
    /// Assembles a model from parts; every row must be a probability vector.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        num_topics: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
        iterations: usize,
        vocab: Vec<String>,
        phi: Vec<f64>,
        doc_topics: Vec<f64>,
    ) -> Result<Self> {
        if num_topics == 0 {
            return Err(Error::InvalidArgument("topic count must be positive".into()));
        }
        let v = vocab.len();
        if phi.len() != num_topics * v {
            return Err(Error::DimensionMismatch {
                expected: num_topics * v,
                found: phi.len(),
            });
        }
        if !doc_topics.len().is_multiple_of(num_topics) {
            return Err(Error::DimensionMismatch {
                expected: num_topics,
                found: doc_topics.len() % num_topics,
            });
        }
        let d = doc_topics.len() / num_topics;
        let header = ModelHeader {
            num_topics,
            alpha,
            beta,
            seed,
            iterations,
            vocab,
            num_docs: d,
            phi_dims: [num_topics, v],
            doc_topics_dims: [d, num_topics],
        };
        let model = Self {
            header,
            phi,
            doc_topics,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if !self.header.vocab.is_empty() {
            for k in 0..self.num_topics() {
                check_simplex(self.phi_row(k), &format!("phi row {k}"))?;
            }
        }
        for d in 0..self.num_docs() {
            check_simplex(self.doc_topics(d as u32), &format!("tau(doc {d})"))?;
        }
        Ok(())
    }

    pub fn header(&self) -> &ModelHeader {
        &self.header
    }

    pub fn num_topics(&self) -> usize {
        self.header.num_topics
    }

    pub fn num_docs(&self) -> usize {
        self.header.num_docs
    }

    pub fn vocab(&self) -> &[String] {
        &self.header.vocab
    }

    pub fn alpha(&self) -> f64 {
        self.header.alpha
    }

    pub fn beta(&self) -> f64 {
        self.header.beta
    }

    /// Topic-word distribution of topic `k`.
    pub fn phi_row(&self, k: usize) -> &[f64] {
        let v = self.header.vocab.len();
        &self.phi[k * v..(k + 1) * v]
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// τ(d), the topic distribution of document `doc_id`.
    ///
    /// Panics if the document is out of range; see [`Self::try_doc_topics`].
    pub fn doc_topics(&self, doc_id: u32) -> &[f64] {
        self.try_doc_topics(doc_id).expect("document id out of range")
    }

    pub fn try_doc_topics(&self, doc_id: u32) -> Option<&[f64]> {
        let k = self.num_topics();
        let start = doc_id as usize * k;
        self.doc_topics.get(start..start + k)
    }

    pub fn all_doc_topics(&self) -> &[f64] {
        &self.doc_topics
    }

    /// Highest-probability words of topic `k`, ties by ascending word.
    pub fn top_words(&self, k: usize, n: usize) -> Vec<TopicWord> {
        let row = self.phi_row(k);
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        order
            .into_iter()
            .take(n)
            .map(|i| TopicWord {
                word: self.header.vocab[i].clone(),
                prob: row[i],
            })
            .collect()
    }

    pub fn summaries(&self, n: usize) -> Vec<TopicSummary> {
        (0..self.num_topics())
            .map(|k| TopicSummary {
                topic: k,
                words: self.top_words(k, n),
            })
            .collect()
    }

    /// JSON header line, then `phi` and `doc_topics` as little-endian f64.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(8 * (self.phi.len() + self.doc_topics.len()));
        for x in self.phi.iter().chain(&self.doc_topics) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = Vec::new();
        r.read_until(b'\n', &mut line)?;
        if line.last() != Some(&b'\n') {
            return Err(Error::Truncated("model header".into()));
        }
        let header: ModelHeader =
            serde_json::from_slice(&line[..line.len() - 1]).map_err(|e| Error::Format(format!("model header: {e}")))?;
        let [k, v] = header.phi_dims;
        let [d, k2] = header.doc_topics_dims;
        if k != header.num_topics || k2 != k || v != header.vocab.len() || d != header.num_docs {
            return Err(Error::Format("inconsistent model dimensions".into()));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        let expected = 8 * (k * v + d * k);
        if rest.len() < expected {
            return Err(Error::Truncated(format!(
                "model payload has {} bytes, expected {expected}",
                rest.len()
            )));
        }
        if rest.len() > expected {
            return Err(Error::Format("trailing bytes after model payload".into()));
        }
        let mut values = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let phi: Vec<f64> = values.by_ref().take(k * v).collect();
        let doc_topics: Vec<f64> = values.collect();
        let model = Self {
            header,
            phi,
            doc_topics,
        };
        model.validate()?;
        Ok(model)
    }
}
