//! `topicvec`: staged pipeline from a document corpus to probed word vectors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod run;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topicvec::synth::{property_corpus, render_corpus, render_labels, PropertyCorpusConfig};

use crate::config::{parse_assignment, PipelineConfig};
use crate::error::CliError;
use crate::stages::Context;

#[derive(Parser)]
#[command(name = "topicvec", version, about = "Topic-partitioned static word vectors")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline configuration file (`key = value` lines).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    overrides: Vec<(String, String)>,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize the corpus and build the vocabulary and mention index.
    Ingest(StageArgs),
    /// Fit the topic model.
    Lda(StageArgs),
    /// Score topic importance and pick relevant topics per target word.
    Topics(StageArgs),
    /// Sample random and topic-specific mentions.
    Select(StageArgs),
    /// Write encoder manifests for the sampled mentions.
    Manifest(StageArgs),
    /// Encode manifest entries, or import an external vector store.
    Encode(StageArgs),
    /// Average mention vectors into static vectors per variant.
    Aggregate(StageArgs),
    /// PCA-reduce every variant.
    Pca(StageArgs),
    /// Tune and train property probes.
    Train(StageArgs),
    /// Evaluate trained probes on the test split.
    Eval(StageArgs),
    /// Nearest neighbours and 2-d coordinates.
    Neighbors(StageArgs),
    /// Run every stage in order.
    All(StageArgs),
    /// Write a synthetic corpus, property labels and a matching config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        words: usize,
    },
}

const SYNTH_CONFIG: &str = "\
# Settings sized for the synthetic corpus.
corpus = corpus.tsv
dataset = properties.tsv
min_positives = 5
min_count = 5
K = 9
lda_iterations = 200
lda_drop_most_frequent = 0
n_random = 50
n_per_topic = 10
encoder_dim = 64
pca_dim = 16
max_epochs = 60
patience = 8
output_dir = runs
";

fn synth(out: &Path, seed: u64, words: usize) -> Result<(), CliError> {
    if words < 10 {
        return Err(CliError::Usage("--words must be at least 10".into()));
    }
    let corpus = property_corpus(&PropertyCorpusConfig {
        num_words: words,
        seed,
        ..PropertyCorpusConfig::default()
    });
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("corpus.tsv"), render_corpus(&corpus.docs))?;
    std::fs::write(out.join("properties.tsv"), render_labels(&corpus.labels))?;
    std::fs::write(out.join("topicvec.conf"), format!("{SYNTH_CONFIG}seed = {seed}\n"))?;
    println!("{}", out.display());
    Ok(())
}

fn stage(args: StageArgs, name: Option<&str>) -> Result<(), CliError> {
    let cfg = PipelineConfig::load(&args.config, &args.overrides)?;
    let mut ctx = Context::new(cfg)?;
    match name {
        Some(stage) => ctx.run_stage(stage)?,
        None => ctx.run_all()?,
    }
    println!("{}", ctx.run.root().display());
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => stage(a, Some("ingest")),
        Command::Lda(a) => stage(a, Some("lda")),
        Command::Topics(a) => stage(a, Some("topics")),
        Command::Select(a) => stage(a, Some("select")),
        Command::Manifest(a) => stage(a, Some("manifest")),
        Command::Encode(a) => stage(a, Some("encode")),
        Command::Aggregate(a) => stage(a, Some("aggregate")),
        Command::Pca(a) => stage(a, Some("pca")),
        Command::Train(a) => stage(a, Some("train")),
        Command::Eval(a) => stage(a, Some("eval")),
        Command::Neighbors(a) => stage(a, Some("neighbors")),
        Command::All(a) => stage(a, None),
        Command::Synth { out, seed, words } => synth(&out, seed, words),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
