//! Contextual encoders, the `CVS1` vector store and the mention manifest.

mod manifest;
mod reference;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{emit_manifest, read_manifest, write_manifest, ManifestEntry};
pub use reference::ReferenceEncoder;
pub use store::{read_store, write_store, VectorStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    /// Target token kept; every layer is returned.
    Unmasked,
    /// Target token replaced by a mask; only the output layer is returned.
    Masked,
}

impl EncodingMode {
    pub fn as_byte(self) -> u8 {
        match self {
            Self::Unmasked => 0,
            Self::Masked => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Self::Unmasked),
            1 => Ok(Self::Masked),
            other => Err(Error::Format(format!("unknown mode byte {other}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unmasked => "unmasked",
            Self::Masked => "masked",
        }
    }
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unmasked" => Ok(Self::Unmasked),
            "masked" => Ok(Self::Masked),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeRequest {
    pub mention_id: u64,
    pub tokens: Vec<String>,
    pub token_index: usize,
    pub mode: EncodingMode,
}

/// Encoder output for one mention. Unmasked requests carry `L + 1` layers
/// (index 0 is the input embedding); masked requests carry the output layer
/// only.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerVectors {
    pub mention_id: u64,
    pub mode: EncodingMode,
    pub layers: Vec<Vec<f32>>,
}

/// Anything that maps a mention in context to per-layer vectors.
pub trait Encoder: Sync {
    fn dim(&self) -> usize;

    /// Number of vectors per record for `mode`.
    fn layer_count(&self, mode: EncodingMode) -> usize;

    fn encode(&self, request: &EncodeRequest) -> Result<LayerVectors>;
}
