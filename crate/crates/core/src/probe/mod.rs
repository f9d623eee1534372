//! Per-property sigmoid probes over static word vectors.
//!
//! Multi-vector inputs are reduced to one vector by a learned softmax
//! combiner: [`LayerCombiner`] over a fixed set of vectors (per-layer
//! vectors), [`TopicCombiner`] over the relevant topics of each word. Combiner
//! scalars are trained jointly with the probe weights.

mod combiner;
mod dataset;
mod metrics;
mod model;
mod tune;

use std::collections::BTreeMap;

use crate::aggregate::{SampleFamily, VariantMatrix};
use crate::error::{Error, Result};

pub use combiner::{LayerCombiner, TopicCombiner};
pub use dataset::{load_property_dataset, parse_property_tsv, PropertyDataset, SplitSpec, Splits};
pub use metrics::{f1_score, macro_f1, Confusion};
pub use model::{fit_probe, train_probe, Combiner, Example, PropertyProbe, TrainConfig};
pub use tune::{
    evaluate, tune_and_evaluate, tune_property, EvaluationReport, Grid, GridRun, Prediction, PropertyResult, TunedProbe,
};

/// What a probe sees for one word.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeInput {
    /// A single static vector, used as is.
    Single(Vec<f64>),
    /// `k` vectors combined by a [`LayerCombiner`].
    Layers(Vec<Vec<f64>>),
    /// `K` topic vectors (zero outside the mask) combined by a
    /// [`TopicCombiner`].
    Topics { vectors: Vec<Vec<f64>>, mask: Vec<bool> },
}

impl ProbeInput {
    pub fn dim(&self) -> usize {
        match self {
            Self::Single(v) => v.len(),
            Self::Layers(vs) | Self::Topics { vectors: vs, .. } => vs.first().map_or(0, Vec::len),
        }
    }

    /// Shape key used to check that all inputs of a probe agree.
    pub(crate) fn shape(&self) -> (u8, usize, usize) {
        match self {
            Self::Single(v) => (0, 1, v.len()),
            Self::Layers(vs) => (1, vs.len(), self.dim()),
            Self::Topics { vectors, .. } => (2, vectors.len(), self.dim()),
        }
    }
}

pub type ProbeInputs = BTreeMap<String, ProbeInput>;

/// Converts a variant matrix into probe inputs, one per word.
pub fn inputs_from_matrix(matrix: &VariantMatrix) -> Result<ProbeInputs> {
    let mut out = BTreeMap::new();
    for (i, word) in matrix.words().iter().enumerate() {
        let slots: Vec<Vec<f64>> = (0..matrix.slots()).map(|s| matrix.slot(i, s).to_vec()).collect();
        let input = match matrix.variant().family() {
            SampleFamily::Topic => {
                let mask: Vec<bool> = (0..matrix.slots()).map(|s| matrix.is_filled(i, s)).collect();
                if !mask.iter().any(|&m| m) {
                    return Err(Error::EmptyRelevantTopics(word.clone()));
                }
                ProbeInput::Topics { vectors: slots, mask }
            }
            _ if matrix.slots() > 1 => ProbeInput::Layers(slots),
            _ => ProbeInput::Single(slots.into_iter().next().unwrap()),
        };
        out.insert(word.clone(), input);
    }
    Ok(out)
}
