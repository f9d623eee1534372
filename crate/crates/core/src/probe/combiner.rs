use crate::aggregate::l2_norm;
use crate::error::{Error, Result};

/// Softmax over `scalars` restricted to `active` entries; inactive weights are
/// exactly zero.
pub(crate) fn masked_softmax(scalars: &[f64], active: impl Fn(usize) -> bool) -> Vec<f64> {
    let max = scalars
        .iter()
        .enumerate()
        .filter(|&(i, _)| active(i))
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = scalars
        .iter()
        .enumerate()
        .map(|(i, &s)| if active(i) { (s - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Forward state of a weighted, normalized combination, kept for backprop.
#[derive(Debug, Clone)]
pub(crate) struct Combined {
    pub weights: Vec<f64>,
    pub output: Vec<f64>,
    pub norm: f64,
}

/// `normalize(Σ weights_i · vectors_i)`, skipping zero weights.
pub(crate) fn combine_weighted<V: AsRef<[f64]>>(weights: Vec<f64>, vectors: &[V]) -> Result<Combined> {
    let dim = vectors.first().map_or(0, |v| v.as_ref().len());
    let mut sum = vec![0.0; dim];
    let mut scale = 0.0;
    for (&w, v) in weights.iter().zip(vectors) {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if w == 0.0 {
            continue;
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += w * x;
        }
        scale += w * l2_norm(v);
    }
    let norm = l2_norm(&sum);
    if !(norm > 1e-12 * scale) || norm == 0.0 {
        return Err(Error::DegenerateAggregate);
    }
    sum.iter_mut().for_each(|x| *x /= norm);
    Ok(Combined {
        weights,
        output: sum,
        norm,
    })
}

/// Gradient of the loss w.r.t. the softmax scalars, given the gradient
/// `grad_out` w.r.t. the normalized output.
pub(crate) fn scalar_gradient<V: AsRef<[f64]>>(combined: &Combined, vectors: &[V], grad_out: &[f64]) -> Vec<f64> {
    let x = &combined.output;
    let proj: f64 = x.iter().zip(grad_out).map(|(a, b)| a * b).sum();
    let grad_sum: Vec<f64> = grad_out
        .iter()
        .zip(x)
        .map(|(g, xi)| (g - xi * proj) / combined.norm)
        .collect();
    let grad_weights: Vec<f64> = vectors
        .iter()
        .zip(&combined.weights)
        .map(|(v, &w)| {
            if w == 0.0 {
                0.0
            } else {
                v.as_ref().iter().zip(&grad_sum).map(|(a, b)| a * b).sum()
            }
        })
        .collect();
    let mean: f64 = combined.weights.iter().zip(&grad_weights).map(|(w, g)| w * g).sum();
    combined
        .weights
        .iter()
        .zip(&grad_weights)
        .map(|(&w, &g)| w * (g - mean))
        .collect()
}

/// Learned soft selection over a fixed list of `k` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCombiner {
    pub scalars: Vec<f64>,
}

impl LayerCombiner {
    /// Uniform start: all scalars zero.
    pub fn uniform(k: usize) -> Self {
        Self { scalars: vec![0.0; k] }
    }

    /// λ = softmax(a).
    pub fn weights(&self) -> Vec<f64> {
        masked_softmax(&self.scalars, |_| true)
    }

    pub fn combine<V: AsRef<[f64]>>(&self, vectors: &[V]) -> Result<Vec<f64>> {
        Ok(self.forward(vectors)?.output)
    }

    pub(crate) fn forward<V: AsRef<[f64]>>(&self, vectors: &[V]) -> Result<Combined> {
        if vectors.len() != self.scalars.len() {
            return Err(Error::DimensionMismatch {
                expected: self.scalars.len(),
                found: vectors.len(),
            });
        }
        if vectors.is_empty() {
            return Err(Error::InvalidArgument("nothing to combine".into()));
        }
        combine_weighted(self.weights(), vectors)
    }
}

/// Learned soft selection over topics, applied to each word's relevant set
/// only.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicCombiner {
    pub scalars: Vec<f64>,
}

impl TopicCombiner {
    pub fn uniform(num_topics: usize) -> Self {
        Self {
            scalars: vec![0.0; num_topics],
        }
    }

    /// μ^w: softmax of the scalars over the relevant topics, zero elsewhere.
    pub fn weights(&self, relevant: &[bool]) -> Result<Vec<f64>> {
        if relevant.len() != self.scalars.len() {
            return Err(Error::DimensionMismatch {
                expected: self.scalars.len(),
                found: relevant.len(),
            });
        }
        if !relevant.iter().any(|&r| r) {
            return Err(Error::EmptyRelevantTopics(String::new()));
        }
        Ok(masked_softmax(&self.scalars, |i| relevant[i]))
    }

    /// Combines `K` topic vectors given the relevant-topic indicator.
    pub fn combine<V: AsRef<[f64]>>(&self, topic_vectors: &[V], relevant: &[bool]) -> Result<Vec<f64>> {
        Ok(self.forward(topic_vectors, relevant)?.output)
    }

    /// Like [`Self::combine`], with the relevant set given as topic ids.
    pub fn combine_topics<V: AsRef<[f64]>>(&self, topic_vectors: &[V], topics: &[u32]) -> Result<Vec<f64>> {
        let mut mask = vec![false; self.scalars.len()];
        for &t in topics {
            *mask
                .get_mut(t as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("topic {t} out of range")))? = true;
        }
        self.combine(topic_vectors, &mask)
    }

    pub(crate) fn forward<V: AsRef<[f64]>>(&self, topic_vectors: &[V], relevant: &[bool]) -> Result<Combined> {
        if topic_vectors.len() != self.scalars.len() {
            return Err(Error::DimensionMismatch {
                expected: self.scalars.len(),
                found: topic_vectors.len(),
            });
        }
        combine_weighted(self.weights(relevant)?, topic_vectors)
    }
}
