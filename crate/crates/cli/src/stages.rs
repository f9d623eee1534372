use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use topicvec::aggregate::{
    nearest_neighbors, read_sidecar, read_variant_vectors, variant_store, write_coordinates_tsv, write_neighbors_tsv,
    write_sidecar, LayerSelect, Pca, SampleFamily,
};
use topicvec::corpus::{build_mention_index, build_vocabulary, ingest_corpus};
use topicvec::encoding::{read_manifest, read_store, write_manifest, write_store};
use topicvec::pipeline::{
    build_matrix, encode_manifest, indexed_words, manifest_for, read_samples, sample_relevant, write_samples,
    SamplingConfig,
};
use topicvec::probe::{
    evaluate, inputs_from_matrix, load_property_dataset, macro_f1, parse_property_tsv, tune_property, EvaluationReport,
    Grid, GridRun, PropertyProbe, SplitSpec, TrainConfig, TunedProbe,
};
use topicvec::topics::{fit_lda, select_relevant_topics, word_topic_importance};
use topicvec::{
    CorpusStore, EncodingMode, MentionIndex, PropertyDataset, ReferenceEncoder, RelevantTopics, TopicModel, Variant,
    VariantMatrix, VectorStore,
};

use crate::config::{EncoderSource, PipelineConfig, VariantKey};
use crate::error::CliError;
use crate::run::{Artifact, RunDir};

pub const STAGES: [&str; 11] = [
    "ingest",
    "lda",
    "topics",
    "select",
    "manifest",
    "encode",
    "aggregate",
    "pca",
    "train",
    "eval",
    "neighbors",
];

type Result<T> = std::result::Result<T, CliError>;

fn index_artifact() -> Artifact {
    Artifact::new("index.jsonl", "mention index", "ingest")
}

fn model_artifact() -> Artifact {
    Artifact::new("model.bin", "topic model", "lda")
}

fn relevant_artifact() -> Artifact {
    Artifact::new("relevant_topics.jsonl", "relevant topics", "topics")
}

fn samples_artifact() -> Artifact {
    Artifact::new("samples.jsonl", "mention samples", "select")
}

fn manifest_artifact(mode: EncodingMode) -> Artifact {
    Artifact::new(format!("manifest.{mode}.jsonl"), format!("{mode} manifest"), "manifest")
}

fn vectors_artifact(mode: EncodingMode) -> Artifact {
    Artifact::new(
        format!("vectors.{mode}.cvs1"),
        format!("{mode} mention vectors"),
        "encode",
    )
}

fn variant_artifact(key: VariantKey) -> Artifact {
    let stage = if key.pca { "pca" } else { "aggregate" };
    Artifact::new(
        format!("variants/{}.cvs1", key.name()),
        format!("{} vectors", key.name()),
        stage,
    )
}

fn sidecar_file(key: VariantKey) -> String {
    format!("variants/{}.sidecar.jsonl", key.name())
}

fn probes_artifact(key: VariantKey) -> Artifact {
    Artifact::new(
        format!("probes/{}.jsonl", key.name()),
        format!("{} probes", key.name()),
        "train",
    )
}

fn plain(variant: Variant) -> VariantKey {
    VariantKey { variant, pca: false }
}

pub struct Context {
    pub cfg: PipelineConfig,
    pub run: RunDir,
}

impl Context {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        let run = RunDir::open(&cfg)?;
        Ok(Self { cfg, run })
    }

    pub fn run_stage(&mut self, stage: &str) -> Result<()> {
        log::info!("stage {stage} in {}", self.run.root().display());
        match stage {
            "ingest" => self.ingest(),
            "lda" => self.lda(),
            "topics" => self.topics(),
            "select" => self.select(),
            "manifest" => self.manifest(),
            "encode" => self.encode(),
            "aggregate" => self.aggregate(),
            "pca" => self.pca(),
            "train" => self.train(),
            "eval" => self.eval(),
            "neighbors" => self.neighbors(),
            other => Err(CliError::Usage(format!("unknown stage {other:?}"))),
        }
    }

    /// Every stage in order; probe stages are skipped without a dataset.
    pub fn run_all(&mut self) -> Result<()> {
        for stage in STAGES {
            if matches!(stage, "train" | "eval") && self.cfg.dataset.is_none() {
                log::warn!("no dataset configured, skipping {stage}");
                continue;
            }
            self.run_stage(stage)?;
        }
        Ok(())
    }

    fn corpus_input(&self) -> (String, PathBuf) {
        ("corpus".to_string(), self.cfg.corpus.clone())
    }

    /// Re-reads the corpus, checking it is the file that was ingested.
    fn load_corpus(&self) -> Result<CorpusStore> {
        let recorded = self
            .run
            .stage("ingest")
            .and_then(|s| s.inputs.get("corpus"))
            .ok_or_else(|| CliError::Missing {
                artifact: "mention index".into(),
                stage: "ingest",
            })?;
        if *recorded != crate::run::sha256_file(&self.cfg.corpus)? {
            return Err(CliError::data(format!(
                "{} changed since it was ingested; rerun ingest",
                self.cfg.corpus.display()
            )));
        }
        Ok(ingest_corpus(&self.cfg.corpus)?)
    }

    fn load_index(&self) -> Result<MentionIndex> {
        let path = self.run.require(&index_artifact())?;
        Ok(MentionIndex::read_jsonl(BufReader::new(File::open(path)?))?)
    }

    fn load_model(&self) -> Result<TopicModel> {
        let path = self.run.require(&model_artifact())?;
        Ok(TopicModel::read(BufReader::new(File::open(path)?))?)
    }

    fn load_store(&self, mode: EncodingMode) -> Result<VectorStore> {
        let path = self.run.require(&vectors_artifact(mode))?;
        Ok(read_store(BufReader::new(File::open(path)?))?)
    }

    fn load_matrix(&self, key: VariantKey) -> Result<VariantMatrix> {
        let path = self.run.require(&variant_artifact(key))?;
        let store = read_store(BufReader::new(File::open(path)?))?;
        let sidecar = read_sidecar(BufReader::new(File::open(self.run.path(&sidecar_file(key)))?))?;
        let vectors = read_variant_vectors(&store, &sidecar)?;
        let slots = match key.variant.family() {
            SampleFamily::Topic => self.cfg.num_topics,
            _ if key.variant.layers() == LayerSelect::All => vectors
                .iter()
                .filter_map(|v| v.layer_index)
                .max()
                .map_or(1, |l| l as usize + 1),
            _ => 1,
        };
        Ok(VariantMatrix::from_vectors(key.variant, slots, &vectors)?)
    }

    fn load_dataset(&self) -> Result<PropertyDataset> {
        let path = self
            .cfg
            .dataset
            .as_ref()
            .ok_or_else(|| CliError::Config("probe stages need a dataset".into()))?;
        let split = match &self.cfg.split {
            Some(p) => SplitSpec::from_file(p)?,
            None => SplitSpec::Random { seed: self.cfg.seed },
        };
        Ok(load_property_dataset(path, self.cfg.min_positives, split)?)
    }

    fn dataset_inputs(&self) -> Vec<(String, PathBuf)> {
        let mut inputs = Vec::new();
        if let Some(d) = &self.cfg.dataset {
            inputs.push(("dataset".to_string(), d.clone()));
        }
        if let Some(s) = &self.cfg.split {
            inputs.push(("split".to_string(), s.clone()));
        }
        inputs
    }

    fn ingest(&mut self) -> Result<()> {
        let store = ingest_corpus(&self.cfg.corpus)?;
        let vocab = build_vocabulary(&store, self.cfg.min_count)?;
        let index = build_mention_index(&store, &vocab)?;
        self.run.write_with("vocab.json", |w| {
            serde_json::to_writer(&mut *w, &vocab)?;
            w.push(b'\n');
            Ok(())
        })?;
        self.run.write_with("index.jsonl", |w| Ok(index.write_jsonl(w)?))?;
        let stats = serde_json::json!({
            "documents": store.len(),
            "sentences": store.documents().iter().map(|d| d.sentences.len()).sum::<usize>(),
            "tokens": store.token_count(),
            "vocabulary": vocab.len(),
            "mentions": index.total_mentions(),
        });
        self.run.write("corpus_stats.json", format!("{stats:#}\n").as_bytes())?;
        let outputs = ["vocab.json", "index.jsonl", "corpus_stats.json"].map(String::from);
        self.run.finish("ingest", &[self.corpus_input()], &outputs)
    }

    fn lda(&mut self) -> Result<()> {
        self.run.require(&index_artifact())?;
        let store = self.load_corpus()?;
        let model = fit_lda(&store, &self.cfg.lda())?;
        self.run.write_with("model.bin", |w| Ok(model.write(w)?))?;
        let mut tsv = String::from("topic\trank\tword\tprobability\n");
        for k in 0..model.num_topics() {
            for (rank, tw) in model.top_words(k, 20).iter().enumerate() {
                let _ = writeln!(tsv, "{k}\t{}\t{}\t{:.6}", rank + 1, tw.word, tw.prob);
            }
        }
        self.run.write("topics.tsv", tsv.as_bytes())?;
        let summaries = serde_json::to_value(model.summaries(10))?;
        self.run.write("topics.json", format!("{summaries:#}\n").as_bytes())?;
        let outputs = ["model.bin", "topics.tsv", "topics.json"].map(String::from);
        self.run.finish("lda", &[self.corpus_input()], &outputs)
    }

    /// Dataset words present in the index, or every indexed word.
    fn target_words(&self, index: &MentionIndex) -> Result<Vec<String>> {
        match &self.cfg.dataset {
            Some(path) => {
                let labels = parse_property_tsv(BufReader::new(File::open(path)?))?;
                Ok(indexed_words(index, labels.keys().map(String::as_str)))
            }
            None => Ok(index.words().map(String::from).collect()),
        }
    }

    fn topics(&mut self) -> Result<()> {
        let model = self.load_model()?;
        let index = self.load_index()?;
        let words = self.target_words(&index)?;
        if words.is_empty() {
            return Err(CliError::data("no target word occurs in the mention index"));
        }
        let mut out = Vec::new();
        for word in &words {
            let importance = word_topic_importance(&model, &index, word)?;
            let relevant = select_relevant_topics(&importance, self.cfg.threshold, self.cfg.max_topics)?;
            serde_json::to_writer(
                &mut out,
                &RelevantRecord {
                    word: word.clone(),
                    topics: relevant.topics,
                    cumulative: relevant.cumulative,
                    tau: importance.tau,
                },
            )?;
            out.push(b'\n');
        }
        self.run.write(&relevant_artifact().file, &out)?;
        self.run
            .finish("topics", &self.dataset_inputs(), &[relevant_artifact().file])
    }

    fn select(&mut self) -> Result<()> {
        let model = self.load_model()?;
        let index = self.load_index()?;
        let path = self.run.require(&relevant_artifact())?;
        let sampling = SamplingConfig {
            threshold: self.cfg.threshold,
            max_topics: self.cfg.max_topics,
            n_random: self.cfg.n_random,
            n_per_topic: self.cfg.n_per_topic,
            seed: self.cfg.seed,
        };
        let mut samples = Vec::new();
        for line in std::io::BufRead::lines(BufReader::new(File::open(path)?)) {
            let rec: RelevantRecord = serde_json::from_str(&line?)?;
            let relevant = RelevantTopics {
                word: rec.word,
                topics: rec.topics,
                cumulative: rec.cumulative,
            };
            samples.push(sample_relevant(&index, &model, relevant, &sampling)?);
        }
        self.run
            .write_with(&samples_artifact().file, |w| Ok(write_samples(&samples, w)?))?;
        self.run.finish("select", &[], &[samples_artifact().file])
    }

    fn manifest(&mut self) -> Result<()> {
        let samples_path = self.run.require(&samples_artifact())?;
        let index = self.load_index()?;
        let store = self.load_corpus()?;
        let samples = read_samples(BufReader::new(File::open(samples_path)?), &index)?;
        let mut outputs = Vec::new();
        for mode in self.cfg.modes() {
            let entries = manifest_for(&samples, &store, mode)?;
            let file = manifest_artifact(mode).file;
            self.run.write_with(&file, |w| Ok(write_manifest(&entries, w)?))?;
            outputs.push(file);
        }
        self.run.finish("manifest", &[self.corpus_input()], &outputs)
    }

    fn encode(&mut self) -> Result<()> {
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for mode in self.cfg.modes() {
            let path = self.run.require(&manifest_artifact(mode))?;
            let entries = read_manifest(BufReader::new(File::open(path)?))?;
            let store = match &self.cfg.encoder {
                EncoderSource::Reference => {
                    let encoder = ReferenceEncoder::new(self.cfg.seed, self.cfg.encoder_layers, self.cfg.encoder_dim)?;
                    encode_manifest(&encoder, &entries)?
                }
                EncoderSource::Store(dir) => {
                    let external = dir.join(format!("vectors.{mode}.cvs1"));
                    let store = read_store(BufReader::new(File::open(&external)?))?;
                    if store.mode() != mode {
                        return Err(CliError::data(format!(
                            "{} holds {} vectors",
                            external.display(),
                            store.mode()
                        )));
                    }
                    if let Some(e) = entries.iter().find(|e| !store.contains(e.mention_id)) {
                        return Err(topicvec::Error::MissingVector(e.mention_id).into());
                    }
                    inputs.push((format!("vectors.{mode}"), external));
                    store
                }
            };
            let file = vectors_artifact(mode).file;
            self.run.write_with(&file, |w| Ok(write_store(&store, w)?))?;
            outputs.push(file);
        }
        self.run.finish("encode", &inputs, &outputs)
    }

    fn write_matrix(&self, key: VariantKey, matrix: &VariantMatrix) -> Result<Vec<String>> {
        let (store, sidecar) = variant_store(&matrix.to_vectors())?;
        let file = variant_artifact(key).file;
        self.run.write_with(&file, |w| Ok(write_store(&store, w)?))?;
        let side = sidecar_file(key);
        self.run.write_with(&side, |w| Ok(write_sidecar(&sidecar, w)?))?;
        Ok(vec![file, side])
    }

    fn aggregate(&mut self) -> Result<()> {
        let samples_path = self.run.require(&samples_artifact())?;
        let index = self.load_index()?;
        let model = self.load_model()?;
        let samples = read_samples(BufReader::new(File::open(samples_path)?), &index)?;
        let mut stores = BTreeMap::new();
        for mode in self.cfg.modes() {
            stores.insert(mode.as_byte(), self.load_store(mode)?);
        }
        let mut outputs = Vec::new();
        for &variant in &self.cfg.variants {
            let matrix = build_matrix(
                &samples,
                variant,
                &stores[&variant.mode().as_byte()],
                model.num_topics(),
            )?;
            outputs.extend(self.write_matrix(plain(variant), &matrix)?);
        }
        self.run.finish("aggregate", &[], &outputs)
    }

    fn pca(&mut self) -> Result<()> {
        let mut outputs = Vec::new();
        for &variant in &self.cfg.variants {
            let matrix = self.load_matrix(plain(variant))?;
            let (reduced, pca) = matrix.pca_reduce(self.cfg.pca_dim)?;
            let key = VariantKey { variant, pca: true };
            outputs.extend(self.write_matrix(key, &reduced)?);
            let ev = format!("variants/{}.eigenvalues.tsv", key.name());
            let mut tsv = String::from("component\teigenvalue\n");
            for (i, e) in pca.eigenvalues().iter().enumerate() {
                let _ = writeln!(tsv, "{i}\t{e:.9e}");
            }
            self.run.write(&ev, tsv.as_bytes())?;
            outputs.push(ev);
        }
        self.run.finish("pca", &[], &outputs)
    }

    fn base_train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.cfg.max_epochs,
            patience: self.cfg.patience,
            seed: self.cfg.seed,
            ..TrainConfig::default()
        }
    }

    fn train(&mut self) -> Result<()> {
        let dataset = self.load_dataset()?;
        let grid = Grid {
            batch_sizes: self.cfg.grid_batch_sizes.clone(),
            learning_rates: self.cfg.grid_learning_rates.clone(),
        };
        let base = self.base_train_config();
        let mut outputs = Vec::new();
        for &key in &self.cfg.probe_variants {
            let inputs = inputs_from_matrix(&self.load_matrix(key)?)?;
            let mut ds = dataset.clone();
            ds.restrict_to(|w| inputs.contains_key(w))?;
            let mut out = Vec::new();
            for property in ds.properties() {
                let tuned = tune_property(&ds, property, &inputs, &grid, &base)?;
                let record = ProbeRecord {
                    property: property.clone(),
                    batch_size: tuned.best.batch_size,
                    learning_rate: tuned.best.learning_rate,
                    dev_f1: tuned.best.dev_f1,
                    epochs: tuned.best.epochs,
                    params: tuned.probe.params(),
                    runs: tuned.runs,
                };
                serde_json::to_writer(&mut out, &record)?;
                out.push(b'\n');
            }
            let file = probes_artifact(key).file;
            self.run.write(&file, &out)?;
            outputs.push(file);
        }
        self.run.finish("train", &self.dataset_inputs(), &outputs)
    }

    fn eval(&mut self) -> Result<()> {
        let dataset = self.load_dataset()?;
        let base = self.base_train_config();
        let mut outputs = Vec::new();
        let mut summary = String::from("variant\tmacro_f1\n");
        for &key in &self.cfg.probe_variants {
            let probes_path = self.run.require(&probes_artifact(key))?;
            let inputs = inputs_from_matrix(&self.load_matrix(key)?)?;
            let mut ds = dataset.clone();
            ds.restrict_to(|w| inputs.contains_key(w))?;
            let shape = inputs
                .values()
                .next()
                .ok_or_else(|| CliError::data("empty variant matrix"))?;
            let mut per_property = BTreeMap::new();
            for line in std::io::BufRead::lines(BufReader::new(File::open(probes_path)?)) {
                let rec: ProbeRecord = serde_json::from_str(&line?)?;
                let config = TrainConfig {
                    batch_size: rec.batch_size,
                    learning_rate: rec.learning_rate,
                    ..base.clone()
                };
                let mut probe = PropertyProbe::for_input(rec.property.clone(), shape, config);
                if probe.num_params() != rec.params.len() {
                    return Err(CliError::data(format!(
                        "{} probe for {} does not match the variant vectors",
                        key.name(),
                        rec.property
                    )));
                }
                probe.set_params(&rec.params);
                probe.epochs_trained = rec.epochs;
                let tuned = TunedProbe {
                    probe,
                    best: GridRun {
                        batch_size: rec.batch_size,
                        learning_rate: rec.learning_rate,
                        dev_f1: rec.dev_f1,
                        epochs: rec.epochs,
                    },
                    runs: rec.runs,
                };
                per_property.insert(rec.property, evaluate(&tuned, &ds, &inputs)?);
            }
            let scores: Vec<f64> = per_property.values().map(|r| r.f1).collect();
            let report = EvaluationReport {
                variant: key.name(),
                macro_f1: macro_f1(&scores),
                per_property,
            };
            let _ = writeln!(summary, "{}\t{:.6}", report.variant, report.macro_f1);

            let file = format!("reports/{}.json", key.name());
            self.run
                .write(&file, format!("{:#}\n", serde_json::to_value(&report)?).as_bytes())?;
            let preds = format!("reports/{}.predictions.tsv", key.name());
            self.run.write_with(&preds, |w| {
                writeln!(w, "property\tword\tprobability\tpredicted\tgold")?;
                for (property, r) in &report.per_property {
                    for p in &r.predictions {
                        writeln!(
                            w,
                            "{property}\t{}\t{:.6}\t{}\t{}",
                            p.word, p.probability, p.predicted, p.gold
                        )?;
                    }
                }
                Ok(())
            })?;
            outputs.extend([file, preds]);
        }
        self.run.write("reports/summary.tsv", summary.as_bytes())?;
        outputs.push("reports/summary.tsv".into());
        self.run.finish("eval", &self.dataset_inputs(), &outputs)
    }

    fn neighbors(&mut self) -> Result<()> {
        let mut outputs = Vec::new();
        for &variant in &self.cfg.neighbor_variants {
            let matrix = self.load_matrix(plain(variant))?;
            let vectors = matrix.to_vectors();
            let queries: BTreeSet<&str> = if self.cfg.neighbor_queries.is_empty() {
                matrix.words().iter().map(String::as_str).collect()
            } else {
                self.cfg.neighbor_queries.iter().map(String::as_str).collect()
            };
            for q in &queries {
                if matrix.word_index(q).is_none() {
                    log::warn!("neighbor query {q:?} has no {variant} vector");
                }
            }
            let mut rows = Vec::new();
            for v in vectors.iter().filter(|v| queries.contains(v.word.as_str())) {
                rows.push((v.clone(), nearest_neighbors(v, &matrix, self.cfg.neighbors_k)?));
            }
            let file = format!("neighbors/{variant}.tsv");
            self.run.write_with(&file, |w| Ok(write_neighbors_tsv(&rows, w)?))?;
            outputs.push(file);

            let filled: Vec<&[f64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
            if filled.len() > 2 && matrix.dim() >= 2 {
                let pca = Pca::fit(&filled, 2)?;
                let coords: Vec<(String, [f64; 2])> = vectors
                    .iter()
                    .map(|v| {
                        let label = match (v.topic_id, v.layer_index) {
                            (Some(t), _) => format!("{}#{t}", v.word),
                            (_, Some(l)) => format!("{}@{l}", v.word),
                            _ => v.word.clone(),
                        };
                        let p = pca.transform(&v.values);
                        (label, [p[0], p[1]])
                    })
                    .collect();
                let file = format!("neighbors/{variant}.coords.tsv");
                self.run.write_with(&file, |w| Ok(write_coordinates_tsv(&coords, w)?))?;
                outputs.push(file);
            }
        }
        self.run.finish("neighbors", &[], &outputs)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RelevantRecord {
    word: String,
    topics: Vec<u32>,
    cumulative: f64,
    tau: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProbeRecord {
    property: String,
    batch_size: usize,
    learning_rate: f64,
    dev_f1: f64,
    epochs: usize,
    /// Weights, bias, then combiner scalars.
    params: Vec<f64>,
    runs: Vec<GridRun>,
}
