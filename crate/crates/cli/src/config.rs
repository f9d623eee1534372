use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use topicvec::topics::LdaConfig;
use topicvec::{EncodingMode, Variant};

use crate::error::CliError;

/// A variant, optionally read from its PCA-reduced copy (`T_mask-PCA`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct VariantKey {
    pub variant: Variant,
    pub pca: bool,
}

impl VariantKey {
    pub fn name(&self) -> String {
        if self.pca {
            format!("{}-PCA", self.variant)
        } else {
            self.variant.to_string()
        }
    }
}

impl FromStr for VariantKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (base, pca) = match s.strip_suffix("-PCA").or_else(|| s.strip_suffix("-pca")) {
            Some(b) => (b, true),
            None => (s, false),
        };
        let variant = base.parse::<Variant>().map_err(|e| e.to_string())?;
        Ok(Self { variant, pca })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderSource {
    Reference,
    /// Directory holding `vectors.masked.cvs1` / `vectors.unmasked.cvs1`
    /// produced by an external extractor.
    Store(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub dataset: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub min_positives: usize,
    pub min_count: u64,
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub lda_iterations: usize,
    pub lda_drop_most_frequent: usize,
    pub lda_min_token_count: u64,
    pub threshold: f64,
    pub max_topics: usize,
    pub n_random: usize,
    pub n_per_topic: usize,
    pub encoder: EncoderSource,
    pub encoder_layers: usize,
    pub encoder_dim: usize,
    pub seed: u64,
    pub grid_batch_sizes: Vec<usize>,
    pub grid_learning_rates: Vec<f64>,
    pub max_epochs: usize,
    pub patience: usize,
    pub variants: Vec<Variant>,
    pub pca_dim: usize,
    pub probe_variants: Vec<VariantKey>,
    pub neighbor_variants: Vec<Variant>,
    pub neighbor_queries: Vec<String>,
    pub neighbors_k: usize,
    pub output_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "corpus",
    "dataset",
    "split",
    "min_positives",
    "min_count",
    "K",
    "alpha",
    "beta",
    "lda_iterations",
    "lda_drop_most_frequent",
    "lda_min_token_count",
    "threshold",
    "max_topics",
    "n_random",
    "n_per_topic",
    "encoder",
    "encoder_layers",
    "encoder_dim",
    "seed",
    "grid_batch_sizes",
    "grid_learning_rates",
    "max_epochs",
    "patience",
    "variants",
    "pca_dim",
    "probe_variants",
    "neighbor_variants",
    "neighbor_queries",
    "neighbors_k",
    "output_dir",
];

fn defaults() -> BTreeMap<&'static str, &'static str> {
    [
        ("min_positives", "10"),
        ("min_count", "100"),
        ("K", "25"),
        ("alpha", "0.0001"),
        ("lda_iterations", "1000"),
        ("lda_drop_most_frequent", "100"),
        ("lda_min_token_count", "5"),
        ("threshold", "0.6"),
        ("max_topics", "6"),
        ("n_random", "500"),
        ("n_per_topic", "100"),
        ("encoder", "reference"),
        ("encoder_layers", "12"),
        ("encoder_dim", "768"),
        ("seed", "0"),
        ("grid_batch_sizes", "4,8,16"),
        ("grid_learning_rates", "0.01,0.005,0.001,0.0001"),
        ("max_epochs", "100"),
        ("patience", "10"),
        (
            "variants",
            "C_mask,C_last,C_input,C_avg,C_all,T_mask,T_last,T_avg,A_mask,A_last,A_avg",
        ),
        ("pca_dim", "300"),
        ("neighbor_variants", "C_mask,T_mask"),
        ("neighbors_k", "10"),
        ("output_dir", "runs"),
    ]
    .into_iter()
    .collect()
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = parse_assignment(line).map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        if out.insert(k.clone(), v).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key {k:?}", i + 1)));
        }
    }
    Ok(out)
}

pub fn parse_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let k = k.trim();
    if !KEYS.contains(&k) {
        return Err(format!("unknown key {k:?}"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|e| CliError::Config(format!("{key}: {s:?}: {e}")))
        })
        .collect()
}

impl PipelineConfig {
    /// Loads `path`, applies `overrides` (flags win) and validates every
    /// referenced input path. Relative paths resolve against the config
    /// file's directory.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut pairs = parse_pairs(&text)?;
        for (k, v) in overrides {
            pairs.insert(k.clone(), v.clone());
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_pairs(&pairs, &base)
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>, base: &Path) -> Result<Self, CliError> {
        let defaults = defaults();
        let get = |k: &str| -> Option<&str> { pairs.get(k).map(String::as_str).or_else(|| defaults.get(k).copied()) };
        let num = |k: &str| -> Result<f64, CliError> {
            get(k)
                .unwrap()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("{k}: {e}")))
        };
        let int = |k: &str| -> Result<u64, CliError> {
            get(k)
                .unwrap()
                .parse::<u64>()
                .map_err(|e| CliError::Config(format!("{k}: {e}")))
        };
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let existing = |k: &str| -> Result<Option<PathBuf>, CliError> {
            match get(k).filter(|v| !v.is_empty()) {
                None => Ok(None),
                Some(v) => {
                    let p = resolve(v);
                    if !p.exists() {
                        return Err(CliError::Config(format!("{k}: {} does not exist", p.display())));
                    }
                    Ok(Some(p))
                }
            }
        };

        let corpus = existing("corpus")?.ok_or_else(|| CliError::Config("corpus is required".into()))?;
        let encoder = match get("encoder").unwrap() {
            "reference" => EncoderSource::Reference,
            _ => EncoderSource::Store(existing("encoder")?.unwrap()),
        };
        let variants: Vec<Variant> = list("variants", get("variants").unwrap())?;
        let probe_variants = match get("probe_variants") {
            Some(v) => list("probe_variants", v)?,
            None => variants
                .iter()
                .map(|&variant| VariantKey { variant, pca: false })
                .collect(),
        };
        let config = Self {
            corpus,
            dataset: existing("dataset")?,
            split: existing("split")?,
            min_positives: int("min_positives")? as usize,
            min_count: int("min_count")?,
            num_topics: int("K")? as usize,
            alpha: num("alpha")?,
            beta: get("beta").map(|_| num("beta")).transpose()?,
            lda_iterations: int("lda_iterations")? as usize,
            lda_drop_most_frequent: int("lda_drop_most_frequent")? as usize,
            lda_min_token_count: int("lda_min_token_count")?,
            threshold: num("threshold")?,
            max_topics: int("max_topics")? as usize,
            n_random: int("n_random")? as usize,
            n_per_topic: int("n_per_topic")? as usize,
            encoder,
            encoder_layers: int("encoder_layers")? as usize,
            encoder_dim: int("encoder_dim")? as usize,
            seed: int("seed")?,
            grid_batch_sizes: list("grid_batch_sizes", get("grid_batch_sizes").unwrap())?,
            grid_learning_rates: list("grid_learning_rates", get("grid_learning_rates").unwrap())?,
            max_epochs: int("max_epochs")? as usize,
            patience: int("patience")? as usize,
            variants,
            pca_dim: int("pca_dim")? as usize,
            probe_variants,
            neighbor_variants: list("neighbor_variants", get("neighbor_variants").unwrap())?,
            neighbor_queries: get("neighbor_queries").map_or(Ok(Vec::new()), |v| list("neighbor_queries", v))?,
            neighbors_k: int("neighbors_k")? as usize,
            output_dir: resolve(get("output_dir").unwrap()),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.num_topics < 2 {
            return bad("K must be at least 2");
        }
        if !(self.alpha > 0.0) || self.beta.is_some_and(|b| !(b > 0.0)) {
            return bad("alpha and beta must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad("threshold must lie in (0, 1]");
        }
        if self.min_count == 0 || self.lda_iterations == 0 || self.max_topics == 0 {
            return bad("min_count, lda_iterations and max_topics must be positive");
        }
        if self.n_random == 0 || self.n_per_topic == 0 {
            return bad("sample sizes must be positive");
        }
        if self.encoder_layers == 0 || self.encoder_dim == 0 || self.pca_dim == 0 || self.neighbors_k == 0 {
            return bad("encoder_layers, encoder_dim, pca_dim and neighbors_k must be positive");
        }
        if self.grid_batch_sizes.is_empty() || self.grid_learning_rates.is_empty() {
            return bad("the hyperparameter grid is empty");
        }
        if self.grid_batch_sizes.contains(&0) || self.grid_learning_rates.iter().any(|&lr| !(lr > 0.0)) {
            return bad("grid values must be positive");
        }
        if self.max_epochs == 0 || self.variants.is_empty() {
            return bad("max_epochs and variants must be non-empty");
        }
        for key in &self.probe_variants {
            if !self.variants.contains(&key.variant) {
                return bad(&format!("probe variant {} is not in variants", key.name()));
            }
        }
        for v in &self.neighbor_variants {
            if !self.variants.contains(v) {
                return bad(&format!("neighbor variant {v} is not in variants"));
            }
        }
        Ok(())
    }

    /// Every setting except the output directory, one `key=value` per line in
    /// key order.
    pub fn canonical(&self) -> String {
        let join = |items: Vec<String>| items.join(",");
        let mut fields: BTreeMap<&str, String> = BTreeMap::new();
        fields.insert("corpus", self.corpus.display().to_string());
        fields.insert(
            "dataset",
            self.dataset.as_ref().map_or(String::new(), |p| p.display().to_string()),
        );
        fields.insert(
            "split",
            self.split.as_ref().map_or(String::new(), |p| p.display().to_string()),
        );
        fields.insert("min_positives", self.min_positives.to_string());
        fields.insert("min_count", self.min_count.to_string());
        fields.insert("K", self.num_topics.to_string());
        fields.insert("alpha", self.alpha.to_string());
        fields.insert("beta", self.lda().beta().to_string());
        fields.insert("lda_iterations", self.lda_iterations.to_string());
        fields.insert("lda_drop_most_frequent", self.lda_drop_most_frequent.to_string());
        fields.insert("lda_min_token_count", self.lda_min_token_count.to_string());
        fields.insert("threshold", self.threshold.to_string());
        fields.insert("max_topics", self.max_topics.to_string());
        fields.insert("n_random", self.n_random.to_string());
        fields.insert("n_per_topic", self.n_per_topic.to_string());
        fields.insert(
            "encoder",
            match &self.encoder {
                EncoderSource::Reference => "reference".into(),
                EncoderSource::Store(p) => p.display().to_string(),
            },
        );
        fields.insert("encoder_layers", self.encoder_layers.to_string());
        fields.insert("encoder_dim", self.encoder_dim.to_string());
        fields.insert("seed", self.seed.to_string());
        fields.insert(
            "grid_batch_sizes",
            join(self.grid_batch_sizes.iter().map(|b| b.to_string()).collect()),
        );
        fields.insert(
            "grid_learning_rates",
            join(self.grid_learning_rates.iter().map(|b| b.to_string()).collect()),
        );
        fields.insert("max_epochs", self.max_epochs.to_string());
        fields.insert("patience", self.patience.to_string());
        fields.insert("variants", join(self.variants.iter().map(|v| v.to_string()).collect()));
        fields.insert("pca_dim", self.pca_dim.to_string());
        fields.insert(
            "probe_variants",
            join(self.probe_variants.iter().map(VariantKey::name).collect()),
        );
        fields.insert(
            "neighbor_variants",
            join(self.neighbor_variants.iter().map(|v| v.to_string()).collect()),
        );
        fields.insert("neighbor_queries", self.neighbor_queries.join(","));
        fields.insert("neighbors_k", self.neighbors_k.to_string());
        let mut out = String::new();
        for (k, v) in fields {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))[..16].to_string()
    }

    pub fn lda(&self) -> LdaConfig {
        LdaConfig {
            num_topics: self.num_topics,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.lda_iterations,
            seed: self.seed,
            drop_most_frequent: self.lda_drop_most_frequent,
            min_token_count: self.lda_min_token_count,
        }
    }

    /// Encoding modes needed by the configured variants.
    pub fn modes(&self) -> Vec<EncodingMode> {
        let mut modes: Vec<EncodingMode> = self.variants.iter().map(|v| v.mode()).collect();
        modes.sort_by_key(|m| m.as_byte());
        modes.dedup();
        modes
    }
}
