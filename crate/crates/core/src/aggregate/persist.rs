use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Neighbor, Variant, WordVector};
use crate::encoding::VectorStore;
use crate::error::{Error, Result};

/// Sidecar line mapping a `CVS1` record id back to its word vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub word: String,
    pub variant: Variant,
    pub topic_id: Option<u32>,
    pub layer_index: Option<u32>,
    pub record_id: u64,
}

/// Packs word vectors into a single-layer store (f32) plus sidecar entries.
/// Record ids are positions in `vectors`.
pub fn variant_store(vectors: &[WordVector]) -> Result<(VectorStore, Vec<SidecarEntry>)> {
    let first = vectors.first().ok_or(Error::EmptyMatrix)?;
    let mut store = VectorStore::new(first.values.len(), 1, first.variant.mode())?;
    let mut sidecar = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        store.insert_flat(i as u64, v.values.iter().map(|&x| x as f32).collect())?;
        sidecar.push(SidecarEntry {
            word: v.word.clone(),
            variant: v.variant,
            topic_id: v.topic_id,
            layer_index: v.layer_index,
            record_id: i as u64,
        });
    }
    Ok((store, sidecar))
}

pub fn write_sidecar<W: Write>(entries: &[SidecarEntry], mut w: W) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sidecar<R: BufRead>(r: R) -> Result<Vec<SidecarEntry>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Joins a store with its sidecar.
pub fn read_variant_vectors(store: &VectorStore, sidecar: &[SidecarEntry]) -> Result<Vec<WordVector>> {
    if store.layer_count() != 1 {
        return Err(Error::Format("variant stores hold one vector per record".into()));
    }
    sidecar
        .iter()
        .map(|e| {
            let values = store
                .get(e.record_id)
                .ok_or(Error::MissingVector(e.record_id))?
                .iter()
                .map(|&x| f64::from(x))
                .collect();
            Ok(WordVector {
                word: e.word.clone(),
                variant: e.variant,
                topic_id: e.topic_id,
                layer_index: e.layer_index,
                values,
            })
        })
        .collect()
}

/// `query, topic, rank, neighbor, cosine` rows; `topic` is `-` for non-topic
/// queries.
pub fn write_neighbors_tsv<W: Write>(rows: &[(WordVector, Vec<Neighbor>)], mut w: W) -> Result<()> {
    writeln!(w, "query\ttopic\trank\tneighbor\tcosine")?;
    for (q, list) in rows {
        let topic = q.topic_id.map_or_else(|| "-".to_string(), |t| t.to_string());
        for (rank, n) in list.iter().enumerate() {
            writeln!(w, "{}\t{}\t{}\t{}\t{:.6}", q.word, topic, rank + 1, n.word, n.cosine)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `label, x, y` rows for 2-D scatter plots.
pub fn write_coordinates_tsv<W: Write>(rows: &[(String, [f64; 2])], mut w: W) -> Result<()> {
    writeln!(w, "label\tx\ty")?;
    for (label, [x, y]) in rows {
        writeln!(w, "{label}\t{x:.6}\t{y:.6}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{read_store, write_store};

    #[test]
    fn store_and_sidecar_round_trip() {
        let vs = vec![
            WordVector {
                word: "cat".into(),
                variant: Variant::TMask,
                topic_id: Some(4),
                layer_index: None,
                values: vec![0.5, -0.25],
            },
            WordVector {
                word: "dog".into(),
                variant: Variant::TMask,
                topic_id: Some(1),
                layer_index: None,
                values: vec![0.125, 1.0],
            },
        ];
        let (store, sidecar) = variant_store(&vs).unwrap();
        let mut raw = Vec::new();
        write_store(&store, &mut raw).unwrap();
        let mut side = Vec::new();
        write_sidecar(&sidecar, &mut side).unwrap();
        assert_eq!(
            std::str::from_utf8(&side).unwrap().lines().next().unwrap(),
            r#"{"word":"cat","variant":"T_mask","topic_id":4,"layer_index":null,"record_id":0}"#
        );
        let back = read_variant_vectors(
            &read_store(raw.as_slice()).unwrap(),
            &read_sidecar(side.as_slice()).unwrap(),
        )
        .unwrap();
        assert_eq!(back, vs);
    }

    #[test]
    fn tsv_layout() {
        let q = WordVector {
            word: "cat".into(),
            variant: Variant::CMask,
            topic_id: None,
            layer_index: None,
            values: vec![1.0],
        };
        let mut out = Vec::new();
        write_neighbors_tsv(
            &[(
                q,
                vec![Neighbor {
                    word: "dog".into(),
                    cosine: 0.5,
                }],
            )],
            &mut out,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "query\ttopic\trank\tneighbor\tcosine\ncat\t-\t1\tdog\t0.500000\n"
        );
        let mut out = Vec::new();
        write_coordinates_tsv(&[("cat".into(), [1.0, -2.0])], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "label\tx\ty\ncat\t1.000000\t-2.000000\n"
        );
    }
}
