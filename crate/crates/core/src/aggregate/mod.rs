//! Static word vectors from per-mention encodings.
//!
//! Every strategy ends in [`aggregate_mentions`]: the sum of the selected
//! per-mention vectors, rescaled to unit length.

mod neighbors;
mod pca;
mod persist;
mod variant;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoding::EncodingMode;
use crate::error::{Error, Result};

pub use neighbors::{cosine, nearest_neighbors, Neighbor};
pub use pca::{pca_reduce, Pca};
pub use persist::{
    read_sidecar, read_variant_vectors, variant_store, write_coordinates_tsv, write_neighbors_tsv, write_sidecar,
    SidecarEntry,
};
pub use variant::{build_variant, VariantMatrix, WordSamples};

/// Sum of `vectors`, normalized. Fails if the sum vanishes.
pub fn aggregate_mentions<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot aggregate an empty vector list".into()))?;
    let dim = first.as_ref().len();
    let mut sum = vec![0.0; dim];
    let mut scale = 0.0;
    for v in vectors {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        scale += l2_norm(v);
    }
    normalize_sum(sum, scale)
}

/// Normalizes an accumulated sum whose inputs had total norm `scale`.
pub(crate) fn normalize_sum(mut sum: Vec<f64>, scale: f64) -> Result<Vec<f64>> {
    let norm = l2_norm(&sum);
    if !(norm > 1e-12 * scale) || norm == 0.0 {
        return Err(Error::DegenerateAggregate);
    }
    sum.iter_mut().for_each(|x| *x /= norm);
    Ok(sum)
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Word-vector strategies. `C_*` use a random mention sample, `T_*` one
/// vector per relevant topic, `A_*` the plain average of the `T_*` vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "C_mask")]
    CMask,
    #[serde(rename = "C_last")]
    CLast,
    #[serde(rename = "C_input")]
    CInput,
    #[serde(rename = "C_avg")]
    CAvg,
    #[serde(rename = "C_all")]
    CAll,
    #[serde(rename = "T_mask")]
    TMask,
    #[serde(rename = "T_last")]
    TLast,
    #[serde(rename = "T_avg")]
    TAvg,
    #[serde(rename = "A_mask")]
    AMask,
    #[serde(rename = "A_last")]
    ALast,
    #[serde(rename = "A_avg")]
    AAvg,
}

/// Which encoder layer(s) a variant reads per mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSelect {
    /// The last layer of the record (the only one for masked stores).
    Output,
    /// Layer 0, the input embedding.
    Input,
    /// Per-mention mean over all layers.
    Mean,
    /// Every layer separately.
    All,
}

/// How mention samples feed a variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFamily {
    Random,
    Topic,
    TopicAverage,
}

impl Variant {
    pub const ALL: [Variant; 11] = [
        Self::CMask,
        Self::CLast,
        Self::CInput,
        Self::CAvg,
        Self::CAll,
        Self::TMask,
        Self::TLast,
        Self::TAvg,
        Self::AMask,
        Self::ALast,
        Self::AAvg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CMask => "C_mask",
            Self::CLast => "C_last",
            Self::CInput => "C_input",
            Self::CAvg => "C_avg",
            Self::CAll => "C_all",
            Self::TMask => "T_mask",
            Self::TLast => "T_last",
            Self::TAvg => "T_avg",
            Self::AMask => "A_mask",
            Self::ALast => "A_last",
            Self::AAvg => "A_avg",
        }
    }

    pub fn mode(self) -> EncodingMode {
        match self {
            Self::CMask | Self::TMask | Self::AMask => EncodingMode::Masked,
            _ => EncodingMode::Unmasked,
        }
    }

    pub fn layers(self) -> LayerSelect {
        match self {
            Self::CMask | Self::TMask | Self::AMask | Self::CLast | Self::TLast | Self::ALast => LayerSelect::Output,
            Self::CInput => LayerSelect::Input,
            Self::CAvg | Self::TAvg | Self::AAvg => LayerSelect::Mean,
            Self::CAll => LayerSelect::All,
        }
    }

    pub fn family(self) -> SampleFamily {
        match self {
            Self::CMask | Self::CLast | Self::CInput | Self::CAvg | Self::CAll => SampleFamily::Random,
            Self::TMask | Self::TLast | Self::TAvg => SampleFamily::Topic,
            Self::AMask | Self::ALast | Self::AAvg => SampleFamily::TopicAverage,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

/// A static vector for one word under one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVector {
    pub word: String,
    pub variant: Variant,
    pub topic_id: Option<u32>,
    pub layer_index: Option<u32>,
    pub values: Vec<f64>,
}
