//! `CVS1` vector store.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "CVS1" | u32 version = 1 | u32 d | u32 layer_count | u8 mode | u64 record_count
//! record_count × ( u64 mention_id | layer_count × d × f32 )
//! ```

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use super::{EncodingMode, LayerVectors};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CVS1";
pub const VERSION: u32 = 1;

/// Per-mention layer vectors sharing one `(d, layer_count, mode)` shape.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dim: usize,
    layer_count: usize,
    mode: EncodingMode,
    records: BTreeMap<u64, Vec<f32>>,
}

impl VectorStore {
    pub fn new(dim: usize, layer_count: usize, mode: EncodingMode) -> Result<Self> {
        if dim == 0 || layer_count == 0 {
            return Err(Error::Format("store dimensions must be positive".into()));
        }
        if mode == EncodingMode::Masked && layer_count != 1 {
            return Err(Error::Format(format!(
                "masked stores hold one vector per record, not {layer_count}"
            )));
        }
        Ok(Self {
            dim,
            layer_count,
            mode,
            records: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    pub fn mode(&self) -> EncodingMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.keys().copied()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.records.contains_key(&id)
    }

    pub fn insert(&mut self, vectors: LayerVectors) -> Result<()> {
        if vectors.mode != self.mode {
            return Err(Error::Format(format!(
                "record {} is {}, store is {}",
                vectors.mention_id, vectors.mode, self.mode
            )));
        }
        if vectors.layers.len() != self.layer_count {
            return Err(Error::DimensionMismatch {
                expected: self.layer_count,
                found: vectors.layers.len(),
            });
        }
        let mut flat = Vec::with_capacity(self.layer_count * self.dim);
        for layer in &vectors.layers {
            if layer.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: layer.len(),
                });
            }
            flat.extend_from_slice(layer);
        }
        self.insert_flat(vectors.mention_id, flat)
    }

    /// Inserts a record given as `layer_count × d` contiguous values.
    ///
    /// Re-inserting an id with a bit-identical payload is a no-op; a different
    /// payload is an error.
    pub fn insert_flat(&mut self, id: u64, flat: Vec<f32>) -> Result<()> {
        if flat.len() != self.layer_count * self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.layer_count * self.dim,
                found: flat.len(),
            });
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format(format!("record {id} has non-finite entries")));
        }
        match self.records.get(&id) {
            Some(existing) if bits_equal(existing, &flat) => Ok(()),
            Some(_) => Err(Error::Format(format!("conflicting records for mention {id}"))),
            None => {
                self.records.insert(id, flat);
                Ok(())
            }
        }
    }

    /// All layers of a record, contiguous.
    pub fn get(&self, id: u64) -> Option<&[f32]> {
        self.records.get(&id).map(Vec::as_slice)
    }

    pub fn layer(&self, id: u64, layer: usize) -> Option<&[f32]> {
        if layer >= self.layer_count {
            return None;
        }
        self.get(id).map(|r| &r[layer * self.dim..(layer + 1) * self.dim])
    }

    pub fn layers(&self, id: u64) -> Option<impl Iterator<Item = &[f32]>> {
        self.get(id).map(|r| r.chunks_exact(self.dim))
    }
}

fn bits_equal(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

pub fn write_store<W: Write>(store: &VectorStore, writer: W) -> Result<()> {
    let mut w = io::BufWriter::new(writer);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(store.dim as u32).to_le_bytes())?;
    w.write_all(&(store.layer_count as u32).to_le_bytes())?;
    w.write_all(&[store.mode.as_byte()])?;
    w.write_all(&(store.records.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 + 4 * store.layer_count * store.dim);
    for (id, flat) in &store.records {
        buf.clear();
        buf.extend_from_slice(&id.to_le_bytes());
        for x in flat {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: impl FnOnce() -> String) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Truncated(what()),
        _ => Error::Io(e),
    })
}

pub fn read_store<R: Read>(reader: R) -> Result<VectorStore> {
    let mut r = io::BufReader::new(reader);
    let mut header = [0u8; 25];
    read_exact_or(&mut r, &mut header, || "header".into())?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = u32_at(8) as usize;
    let layer_count = u32_at(12) as usize;
    let mode = EncodingMode::from_byte(header[16])?;
    let count = u64::from_le_bytes(header[17..25].try_into().unwrap());

    let mut store = VectorStore::new(dim, layer_count, mode)?;
    let width = layer_count * dim;
    let mut payload = vec![0u8; 8 + 4 * width];
    for i in 0..count {
        read_exact_or(&mut r, &mut payload, || {
            format!("header promises {count} records, found {i}")
        })?;
        let id = u64::from_le_bytes(payload[..8].try_into().unwrap());
        let flat = payload[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store.insert_flat(id, flat)?;
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format(format!("trailing data after {count} records")));
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> VectorStore {
        let mut s = VectorStore::new(3, 2, EncodingMode::Unmasked).unwrap();
        for id in [7u64, 2, 11] {
            let v = id as f32;
            s.insert(LayerVectors {
                mention_id: id,
                mode: EncodingMode::Unmasked,
                layers: vec![vec![v, -v, 0.1], vec![1.0 / v, f32::MIN_POSITIVE, -0.0]],
            })
            .unwrap();
        }
        s
    }

    fn bytes(s: &VectorStore) -> Vec<u8> {
        let mut out = Vec::new();
        write_store(s, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let raw = bytes(&s);
        assert_eq!(raw.len(), 25 + 3 * (8 + 4 * 6));
        let back = read_store(raw.as_slice()).unwrap();
        assert_eq!(bytes(&back), raw);
        assert_eq!(back.layer(7, 1).unwrap()[2].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn wrong_magic() {
        let mut raw = bytes(&sample());
        raw[0] = b'X';
        assert!(matches!(read_store(raw.as_slice()), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn wrong_version() {
        let mut raw = bytes(&sample());
        raw[4] = 2;
        assert!(matches!(read_store(raw.as_slice()), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn record_count_larger_than_payload() {
        let mut raw = bytes(&sample());
        raw[17] = 4;
        assert!(matches!(read_store(raw.as_slice()), Err(Error::Truncated(_))));
        let raw = bytes(&sample());
        assert!(matches!(read_store(&raw[..raw.len() - 3]), Err(Error::Truncated(_))));
        assert!(matches!(read_store(&raw[..10]), Err(Error::Truncated(_))));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut raw = bytes(&sample());
        raw[17] = 2;
        assert!(matches!(read_store(raw.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn shape_checks() {
        let mut s = VectorStore::new(2, 1, EncodingMode::Masked).unwrap();
        let bad = LayerVectors {
            mention_id: 0,
            mode: EncodingMode::Masked,
            layers: vec![vec![1.0, 2.0, 3.0]],
        };
        assert!(matches!(
            s.insert(bad),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
        let unmasked = LayerVectors {
            mention_id: 0,
            mode: EncodingMode::Unmasked,
            layers: vec![vec![1.0, 2.0]],
        };
        assert!(s.insert(unmasked).is_err());
        assert!(VectorStore::new(2, 3, EncodingMode::Masked).is_err());
    }

    #[test]
    fn duplicate_ids() {
        let mut s = VectorStore::new(1, 1, EncodingMode::Masked).unwrap();
        s.insert_flat(1, vec![0.5]).unwrap();
        s.insert_flat(1, vec![0.5]).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.insert_flat(1, vec![0.25]).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_payloads_round_trip(
            dim in 1usize..6,
            layers in 1usize..4,
            ids in prop::collection::btree_set(any::<u64>(), 0..6),
            seed in any::<u32>(),
        ) {
            let mut s = VectorStore::new(dim, layers, EncodingMode::Unmasked).unwrap();
            for (n, id) in ids.iter().enumerate() {
                let flat = (0..dim * layers)
                    .map(|j| f32::from_bits((seed ^ (n * 31 + j) as u32) & 0x7f7f_ffff))
                    .collect();
                s.insert_flat(*id, flat).unwrap();
            }
            let raw = bytes(&s);
            let back = read_store(raw.as_slice()).unwrap();
            prop_assert_eq!(bytes(&back), raw);
        }
    }
}
