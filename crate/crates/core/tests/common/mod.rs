#![allow(dead_code)]

use topicvec::aggregate::WordSamples;
use topicvec::corpus::{build_mention_index, build_vocabulary};
use topicvec::encoding::{EncodingMode, ReferenceEncoder};
use topicvec::pipeline::{
    build_matrix, encode_manifest, evaluate_matrix, indexed_words, manifest_for, sample_words, SamplingConfig,
};
use topicvec::probe::{Grid, PropertyDataset, SplitSpec, TrainConfig};
use topicvec::synth::{property_corpus, PropertyCorpusConfig};
use topicvec::topics::{fit_lda, LdaConfig};
use topicvec::{Variant, VariantMatrix, VectorStore};

/// Masked-mode pipeline state on the property fixture.
pub struct MaskedFixture {
    pub seed: u64,
    pub num_topics: usize,
    pub samples: Vec<WordSamples>,
    pub vectors: VectorStore,
    pub dataset: PropertyDataset,
}

impl MaskedFixture {
    pub fn new(seed: u64) -> Self {
        let corpus = property_corpus(&PropertyCorpusConfig {
            seed,
            ..PropertyCorpusConfig::default()
        });
        let store = corpus.store().unwrap();
        let index = build_mention_index(&store, &build_vocabulary(&store, 5).unwrap()).unwrap();
        let lda = LdaConfig {
            num_topics: 9,
            iterations: 200,
            seed,
            drop_most_frequent: 0,
            ..LdaConfig::default()
        };
        let model = fit_lda(&store, &lda).unwrap();
        let sampling = SamplingConfig {
            n_random: 50,
            n_per_topic: 10,
            seed,
            ..SamplingConfig::default()
        };
        let words = indexed_words(&index, corpus.words.iter().map(String::as_str));
        let samples = sample_words(&index, &model, &words, &sampling).unwrap();
        let encoder = ReferenceEncoder::new(seed, 12, 64).unwrap();
        let vectors =
            encode_manifest(&encoder, &manifest_for(&samples, &store, EncodingMode::Masked).unwrap()).unwrap();
        let dataset = PropertyDataset::new(corpus.labels, 10, SplitSpec::Random { seed }).unwrap();
        Self {
            seed,
            num_topics: model.num_topics(),
            samples,
            vectors,
            dataset,
        }
    }

    pub fn matrix(&self, variant: Variant) -> VariantMatrix {
        build_matrix(&self.samples, variant, &self.vectors, self.num_topics).unwrap()
    }

    pub fn macro_f1(&self, variant: Variant) -> f64 {
        let train = TrainConfig {
            seed: self.seed,
            ..TrainConfig::default()
        };
        evaluate_matrix(&self.matrix(variant), &self.dataset, &Grid::default(), &train)
            .unwrap()
            .macro_f1
    }
}

/// Unit-free relative error with an absolute floor for near-zero gradients.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Sample covariance with the n - 1 denominator.
pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in &mut cov {
        for x in row.iter_mut() {
            *x /= (n - 1) as f64;
        }
    }
    cov
}

/// Mean cosine between planted and recovered topics under the best
/// one-to-one matching, by brute force over permutations.
pub fn best_match_cosine(planted: &[Vec<f64>], recovered: &[Vec<f64>]) -> f64 {
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let k = planted.len();
    let sims: Vec<Vec<f64>> = planted
        .iter()
        .map(|p| recovered.iter().map(|r| cos(p, r)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..recovered.len()).collect();
    let mut best = f64::NEG_INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let score = (0..k).map(|i| sims[i][p[i]]).sum::<f64>() / k as f64;
        best = best.max(score);
    });
    best
}

fn permute(p: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        f(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, f);
        p.swap(start, i);
    }
}
