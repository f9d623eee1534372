use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;
use rand_distr::StandardNormal;

use super::{EncodeRequest, Encoder, EncodingMode, LayerVectors};
use crate::error::{Error, Result};
use crate::seed;

/// Deterministic stand-in for a contextual language model.
///
/// Every token string gets a unit-norm pseudo-random base vector `b(t)` seeded
/// by `(seed, t)`. With `m` the mean base vector of the context (all tokens
/// except the target), unmasked layer `l` is
/// `normalize((1 - l/L) * b(target) + (l/L) * m)` and the masked output is
/// `normalize(m)`, which does not depend on the target at all.
pub struct ReferenceEncoder {
    seed: u64,
    layers: usize,
    dim: usize,
    cache: RwLock<HashMap<String, Arc<[f64]>>>,
}

impl ReferenceEncoder {
    /// `layers` is the number of transformer layers `L`; unmasked records have
    /// `L + 1` vectors.
    pub fn new(seed: u64, layers: usize, dim: usize) -> Result<Self> {
        if layers == 0 || dim == 0 {
            return Err(Error::InvalidArgument("encoder needs L >= 1 and d >= 1".into()));
        }
        Ok(Self {
            seed,
            layers,
            dim,
            cache: RwLock::new(HashMap::new()),
        })
    }

    /// The unit-norm base vector of `token`.
    pub fn base_vector(&self, token: &str) -> Arc<[f64]> {
        if let Some(v) = self.cache.read().unwrap().get(token) {
            return Arc::clone(v);
        }
        let mut rng = seed::rng(seed::derive(self.seed, token));
        let mut v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let v: Arc<[f64]> = v.into();
        self.cache
            .write()
            .unwrap()
            .entry(token.to_string())
            .or_insert(v)
            .clone()
    }

    fn context_mean(&self, tokens: &[String], target: usize) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut n = 0usize;
        for (i, tok) in tokens.iter().enumerate() {
            if i == target {
                continue;
            }
            for (s, x) in sum.iter_mut().zip(self.base_vector(tok).iter()) {
                *s += x;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        sum.iter_mut().for_each(|s| *s /= n as f64);
        Some(sum)
    }
}

fn normalized_f32(v: &[f64]) -> Result<Vec<f32>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 1e-12) {
        return Err(Error::DegenerateAggregate);
    }
    Ok(v.iter().map(|x| (x / norm) as f32).collect())
}

impl Encoder for ReferenceEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn layer_count(&self, mode: EncodingMode) -> usize {
        match mode {
            EncodingMode::Unmasked => self.layers + 1,
            EncodingMode::Masked => 1,
        }
    }

    fn encode(&self, req: &EncodeRequest) -> Result<LayerVectors> {
        if req.token_index >= req.tokens.len() {
            return Err(Error::InvalidArgument(format!(
                "token index {} out of range for a {}-token sentence",
                req.token_index,
                req.tokens.len()
            )));
        }
        let context = self.context_mean(&req.tokens, req.token_index);
        let layers = match req.mode {
            EncodingMode::Masked => {
                let m = context.ok_or_else(|| Error::InvalidArgument("masked request has no context tokens".into()))?;
                vec![normalized_f32(&m)?]
            }
            EncodingMode::Unmasked => {
                let b = self.base_vector(&req.tokens[req.token_index]);
                match context {
                    None => vec![normalized_f32(&b)?; self.layers + 1],
                    Some(m) => (0..=self.layers)
                        .map(|l| {
                            let g = l as f64 / self.layers as f64;
                            let mixed: Vec<f64> = b.iter().zip(&m).map(|(bt, mt)| (1.0 - g) * bt + g * mt).collect();
                            normalized_f32(&mixed)
                        })
                        .collect::<Result<_>>()?,
                }
            }
        };
        Ok(LayerVectors {
            mention_id: req.mention_id,
            mode: req.mode,
            layers,
        })
    }
}
