use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;

/// A stage output other stages depend on.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub file: String,
    pub what: String,
    pub stage: &'static str,
}

impl Artifact {
    pub fn new(file: impl Into<String>, what: impl Into<String>, stage: &'static str) -> Self {
        Self {
            file: file.into(),
            what: what.into(),
            stage,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RunRecord {
    config_hash: String,
    config: BTreeMap<String, String>,
    stages: BTreeMap<String, StageRecord>,
}

/// The per-config output directory `output_dir/<config hash>/`.
pub struct RunDir {
    root: PathBuf,
    record: RunRecord,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    let mut reader = BufReader::new(File::open(path)?);
    loop {
        let buf = reader.fill_buf()?;
        if buf.is_empty() {
            break;
        }
        hasher.update(buf);
        let n = buf.len();
        reader.consume(n);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunDir {
    pub fn open(config: &PipelineConfig) -> Result<Self, CliError> {
        let hash = config.hash();
        let root = config.output_dir.join(&hash);
        std::fs::create_dir_all(&root)?;
        let config_map: BTreeMap<String, String> = config
            .canonical()
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let run_json = root.join("run.json");
        let record = if run_json.exists() {
            let record: RunRecord = serde_json::from_reader(BufReader::new(File::open(&run_json)?))?;
            if record.config_hash != hash || record.config != config_map {
                return Err(CliError::Config(format!(
                    "{} belongs to a different configuration ({}); refusing to overwrite",
                    root.display(),
                    record.config_hash
                )));
            }
            record
        } else {
            RunRecord {
                config_hash: hash,
                config: config_map,
                stages: BTreeMap::new(),
            }
        };
        Ok(Self { root, record })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Path of `artifact`, or a missing-dependency error naming its stage.
    pub fn require(&self, artifact: &Artifact) -> Result<PathBuf, CliError> {
        let p = self.path(&artifact.file);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::Missing {
                artifact: artifact.what.clone(),
                stage: artifact.stage,
            })
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.record.stages.get(name)
    }

    /// Writes `bytes` to `rel` through a temporary file and a rename.
    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.path(rel);
        let parent = target.parent().expect("run-relative paths have a parent");
        std::fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target).map_err(|e| e.error)?;
        Ok(())
    }

    /// Renders into memory with `f`, then writes atomically.
    pub fn write_with<F>(&self, rel: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    /// Records input and output hashes of a finished stage in `run.json`.
    pub fn finish(&mut self, stage: &str, inputs: &[(String, PathBuf)], outputs: &[String]) -> Result<(), CliError> {
        let mut record = StageRecord::default();
        for (name, path) in inputs {
            record.inputs.insert(name.clone(), sha256_file(path)?);
        }
        for rel in outputs {
            record.outputs.insert(rel.clone(), sha256_file(&self.path(rel))?);
        }
        self.record.stages.insert(stage.to_string(), record);
        let mut text = serde_json::to_vec_pretty(&self.record)?;
        text.push(b'\n');
        self.write("run.json", &text)
    }
}
