use std::collections::BTreeMap;

use proptest::prelude::*;

use topicvec::aggregate::Pca;
use topicvec::corpus::{build_mention_index, build_vocabulary, tokenize, CorpusStore};
use topicvec::probe::{tune_and_evaluate, Grid, ProbeInput, PropertyDataset, SplitSpec, TrainConfig};
use topicvec::topics::{
    fit_lda, select_random_mentions, select_relevant_topics, select_topic_mentions, word_topic_importance,
    GibbsSampler, LdaConfig, WordTopicImportance,
};
use topicvec::{LayerCombiner, TopicCombiner};

const ALPHABET: [&str; 8] = ["ant", "bee", "cat", "dog", "eel", "fox", "gnu", "hen"];

fn corpus_text() -> impl Strategy<Value = String> {
    let sentence = prop::collection::vec(0..ALPHABET.len(), 1..6);
    let doc = prop::collection::vec(sentence, 1..5);
    prop::collection::vec(doc, 1..12).prop_map(|docs| {
        docs.iter()
            .enumerate()
            .map(|(i, sents)| {
                let text: Vec<String> = sents
                    .iter()
                    .map(|s| s.iter().map(|&t| ALPHABET[t]).collect::<Vec<_>>().join(" ") + ".")
                    .collect();
                format!("d{i}\t{}\n", text.join(" "))
            })
            .collect()
    })
}

fn simplex(max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..max_k).prop_map(|raw| {
        let raw: Vec<f64> = raw.iter().map(|x| x + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|x| x / total).collect()
    })
}

fn small_model(store: &CorpusStore, k: usize) -> topicvec::TopicModel {
    let config = LdaConfig {
        num_topics: k,
        alpha: 0.5,
        iterations: 5,
        drop_most_frequent: 0,
        min_token_count: 1,
        ..LdaConfig::default()
    };
    fit_lda(store, &config).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn index_conserves_counts_and_dereferences(text in corpus_text()) {
        let store = CorpusStore::parse(&text).unwrap();
        let vocab = build_vocabulary(&store, 1).unwrap();
        let index = build_mention_index(&store, &vocab).unwrap();
        let postings: usize = index.iter().map(|(_, p)| p.len()).sum();
        prop_assert_eq!(postings as u64, vocab.total());
        prop_assert_eq!(postings, store.token_count());
        for (word, list) in index.iter() {
            for m in list {
                prop_assert_eq!(store.token(m.doc_id, m.sent_id, m.token_index), Some(word));
            }
        }
        let mut ids: Vec<u64> = index.iter().flat_map(|(_, p)| p.iter().map(|m| m.mention_id)).collect();
        ids.sort_unstable();
        prop_assert!(ids.iter().copied().eq(0..postings as u64));
    }

    #[test]
    fn ingestion_is_deterministic_and_sequential(text in corpus_text()) {
        let a = CorpusStore::parse(&text).unwrap();
        let b = CorpusStore::parse(&text).unwrap();
        prop_assert_eq!(&a, &b);
        let sequential = CorpusStore::from_tokenized(text.lines().map(|line| {
            let (name, body) = line.split_once('\t').unwrap();
            (name.to_string(), tokenize(body))
        }))
        .unwrap();
        prop_assert_eq!(&a, &sequential);
        let va = build_vocabulary(&a, 1).unwrap();
        prop_assert_eq!(build_mention_index(&a, &va).unwrap(), build_mention_index(&b, &va).unwrap());
    }

    #[test]
    fn gibbs_counts_conserved(text in corpus_text(), k in 2usize..6, seed in 0u64..1000) {
        let store = CorpusStore::parse(&text).unwrap();
        let config = LdaConfig {
            num_topics: k,
            iterations: 1,
            seed,
            drop_most_frequent: 0,
            min_token_count: 1,
            ..LdaConfig::default()
        };
        let mut sampler = GibbsSampler::new(&store, &config).unwrap();
        for _ in 0..5 {
            sampler.sweep();
            prop_assert!(sampler.check_counts().is_ok());
        }
    }

    #[test]
    fn topic_distributions_are_simplexes(text in corpus_text(), k in 2usize..6) {
        let store = CorpusStore::parse(&text).unwrap();
        let model = small_model(&store, k);
        let index = build_mention_index(&store, &build_vocabulary(&store, 1).unwrap()).unwrap();
        for d in 0..model.num_docs() {
            let tau = model.doc_topics(d as u32);
            prop_assert!(tau.iter().all(|&p| p >= 0.0));
            prop_assert!((tau.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for w in index.words() {
            let tau = word_topic_importance(&model, &index, w).unwrap().tau;
            prop_assert!(tau.iter().all(|&p| p >= 0.0));
            prop_assert!((tau.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn relevant_topics_are_minimal(tau in simplex(30), threshold in 0.05f64..1.0, cap in 1usize..8) {
        let imp = WordTopicImportance { word: "w".into(), tau: tau.clone() };
        let sel = select_relevant_topics(&imp, threshold, cap).unwrap();
        prop_assert!(!sel.topics.is_empty() && sel.topics.len() <= cap);
        let without_last: f64 = sel.topics[..sel.topics.len() - 1].iter().map(|&t| tau[t as usize]).sum();
        prop_assert!(without_last < threshold);
        let all: f64 = sel.topics.iter().map(|&t| tau[t as usize]).sum();
        prop_assert!(sel.topics.len() == cap || sel.topics.len() == tau.len() || all >= threshold - 1e-12);
        for pair in sel.topics.windows(2) {
            prop_assert!(tau[pair[0] as usize] >= tau[pair[1] as usize]);
        }
    }

    #[test]
    fn topic_samples_are_prefix_monotone(text in corpus_text(), k in 2usize..4, n in 1usize..6, extra in 1usize..6) {
        let store = CorpusStore::parse(&text).unwrap();
        let model = small_model(&store, k);
        let index = build_mention_index(&store, &build_vocabulary(&store, 1).unwrap()).unwrap();
        for w in index.words() {
            for t in 0..k as u32 {
                let short = select_topic_mentions(&index, &model, w, t, n).unwrap();
                let long = select_topic_mentions(&index, &model, w, t, n + extra).unwrap();
                prop_assert_eq!(&short, &select_topic_mentions(&index, &model, w, t, n).unwrap());
                prop_assert!(long.mentions.starts_with(&short.mentions));
                prop_assert!(short.mentions.len() <= n);
            }
        }
    }

    #[test]
    fn combiner_weights_are_distributions(
        scalars in prop::collection::vec(-20.0f64..20.0, 1..10),
        mask_bits in prop::collection::vec(any::<bool>(), 10),
    ) {
        let k = scalars.len();
        let lambda = LayerCombiner { scalars: scalars.clone() }.weights();
        prop_assert!(lambda.iter().all(|&l| l > 0.0));
        prop_assert!((lambda.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let mut mask = mask_bits[..k].to_vec();
        mask[0] = true;
        let mu = TopicCombiner { scalars }.weights(&mask).unwrap();
        for (m, on) in mu.iter().zip(&mask) {
            if *on {
                prop_assert!(*m > 0.0);
            } else {
                prop_assert_eq!(*m, 0.0);
            }
        }
        prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pca_basis_is_orthonormal(seed in 0u64..10_000, n in 12usize..40, d in 2usize..10) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let pca = Pca::fit(&rows, d).unwrap();
        let c = pca.components();
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn random_sampling_is_uniform() {
    let text: String = (0..10).map(|i| format!("d{i}\tcat sat.\n")).collect();
    let store = CorpusStore::parse(&text).unwrap();
    let index = build_mention_index(&store, &build_vocabulary(&store, 1).unwrap()).unwrap();
    let trials = 4000;
    let mut hits: BTreeMap<u32, usize> = BTreeMap::new();
    for seed in 0..trials {
        let s = select_random_mentions(&index, "cat", 5, seed).unwrap();
        assert_eq!(s.mentions.len(), 5);
        for m in &s.mentions {
            *hits.entry(m.doc_id).or_default() += 1;
        }
    }
    assert_eq!(hits.len(), 10);
    for (doc, h) in hits {
        let freq = h as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.05, "doc {doc}: {freq}");
    }
}

#[test]
fn report_macro_f1_matches_predictions() {
    let mut labels = BTreeMap::new();
    let mut inputs = BTreeMap::new();
    for i in 0..40 {
        let word = format!("w{i:02}");
        let mut props = std::collections::BTreeSet::new();
        if i % 2 == 0 {
            props.insert("even".to_string());
        }
        if i % 3 == 0 {
            props.insert("third".to_string());
        }
        let x = i as f64;
        inputs.insert(
            word.clone(),
            ProbeInput::Single(vec![(x * 0.7).sin(), (x * 1.3).cos(), 1.0]),
        );
        labels.insert(word, props);
    }
    let dataset = PropertyDataset::new(labels, 5, SplitSpec::Random { seed: 2 }).unwrap();
    let grid = Grid {
        batch_sizes: vec![4, 8],
        learning_rates: vec![0.01, 0.001],
    };
    let config = TrainConfig {
        max_epochs: 20,
        ..TrainConfig::default()
    };
    let report = tune_and_evaluate("C_mask", &dataset, &inputs, &grid, &config).unwrap();
    assert_eq!(report.per_property.len(), 2);
    assert_eq!(report.macro_f1, report.recomputed_macro_f1());
    for r in report.per_property.values() {
        assert_eq!(r.predictions.len(), dataset.splits().test.len());
    }
    let again = tune_and_evaluate("C_mask", &dataset, &inputs, &grid, &config).unwrap();
    assert_eq!(report, again);
}
