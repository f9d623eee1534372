use super::{l2_norm, SampleFamily, VariantMatrix, WordVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub word: String,
    pub cosine: f64,
}

/// Cosine similarity; 0 when either side is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Top-`k` words of `matrix` by cosine to `query`, excluding the query word.
///
/// Topic queries are compared against the same topic slot of other words and
/// per-layer queries against the same layer; words without a vector in that
/// slot are skipped. Ties go to the lexically smaller word.
pub fn nearest_neighbors(query: &WordVector, matrix: &VariantMatrix, k: usize) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if query.values.len() != matrix.dim() {
        return Err(Error::DimensionMismatch {
            expected: matrix.dim(),
            found: query.values.len(),
        });
    }
    let slot = match matrix.variant().family() {
        SampleFamily::Topic => query
            .topic_id
            .ok_or_else(|| Error::InvalidArgument("topic variant query needs a topic id".into()))?
            as usize,
        _ if matrix.slots() > 1 => query
            .layer_index
            .ok_or_else(|| Error::InvalidArgument("per-layer query needs a layer index".into()))?
            as usize,
        _ => 0,
    };
    if slot >= matrix.slots() {
        return Err(Error::InvalidArgument(format!("slot {slot} out of range")));
    }

    let mut scored: Vec<Neighbor> = matrix
        .words()
        .iter()
        .enumerate()
        .filter(|&(i, w)| *w != query.word && matrix.is_filled(i, slot))
        .map(|(i, w)| Neighbor {
            word: w.clone(),
            cosine: cosine(&query.values, matrix.slot(i, slot)),
        })
        .collect();
    scored.sort_by(|a, b| b.cosine.total_cmp(&a.cosine).then_with(|| a.word.cmp(&b.word)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::Variant;

    fn wv(word: &str, values: &[f64]) -> WordVector {
        WordVector {
            word: word.into(),
            variant: Variant::CMask,
            topic_id: None,
            layer_index: None,
            values: values.to_vec(),
        }
    }

    fn matrix(rows: &[(&str, &[f64])]) -> VariantMatrix {
        let vs: Vec<_> = rows.iter().map(|(w, v)| wv(w, v)).collect();
        VariantMatrix::from_vectors(Variant::CMask, 1, &vs).unwrap()
    }

    #[test]
    fn query_word_excluded_duplicate_on_top() {
        let m = matrix(&[("cat", &[1.0, 0.0]), ("kitten", &[1.0, 0.0]), ("dog", &[0.6, 0.8])]);
        let n = nearest_neighbors(&wv("cat", &[1.0, 0.0]), &m, 5).unwrap();
        assert_eq!(n.len(), 2);
        assert_eq!(n[0].word, "kitten");
        assert!((n[0].cosine - 1.0).abs() < 1e-15);
        assert_eq!(n[1].word, "dog");
    }

    #[test]
    fn orthogonal_query_ties_lexically() {
        let m = matrix(&[
            ("b", &[1.0, 0.0, 0.0]),
            ("a", &[0.0, 1.0, 0.0]),
            ("c", &[0.0, 0.0, 0.0]),
        ]);
        let n = nearest_neighbors(&wv("q", &[0.0, 0.0, 1.0]), &m, 3).unwrap();
        let words: Vec<_> = n.iter().map(|x| x.word.as_str()).collect();
        assert_eq!(words, ["a", "b", "c"]);
        assert!(n.iter().all(|x| x.cosine == 0.0));
    }

    #[test]
    fn invalid_queries() {
        let m = matrix(&[("a", &[1.0, 0.0])]);
        assert!(nearest_neighbors(&wv("q", &[1.0, 0.0]), &m, 0).is_err());
        assert!(nearest_neighbors(&wv("q", &[1.0]), &m, 1).is_err());
    }
}
