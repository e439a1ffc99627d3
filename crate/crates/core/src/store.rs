//! On-disk layout of a world directory and a trained policy.
//!
//! A world directory holds `dataset.jsonl`, `corpus.jsonl`,
//! `knowledge.jsonl` and `world.conf` (flat `key = value`).

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_kv, KvError};
use crate::retrieval::{read_corpus, Document, RetrievalError};
use crate::simenv::{
    Dataset, GeneratedWorld, InternalKnowledge, PolicyParams, Question, SimConfig, SimError, World,
};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const KNOWLEDGE_FILE: &str = "knowledge.jsonl";
pub const WORLD_CONF_FILE: &str = "world.conf";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: KvError },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid policy parameters: {0}")]
    Params(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_jsonl<T: Serialize>(
    path: &Path,
    items: impl IntoIterator<Item = T>,
) -> Result<(), StoreError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(&item).expect("plain data serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| StoreError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct KnowledgeRecord {
    id: String,
    answer: String,
}

pub fn read_dataset(path: &Path, seed: u64) -> Result<Dataset, StoreError> {
    Ok(Dataset {
        questions: read_jsonl::<Question>(path)?,
        seed,
    })
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<Document>, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        RetrievalError::MalformedLine { line, message } => StoreError::Malformed {
            path: path.to_path_buf(),
            line,
            message,
        },
        RetrievalError::Io(source) => StoreError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => StoreError::Sim(other.into()),
    })
}

/// Simulation settings plus the seed that drives feature noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldMeta {
    pub seed: u64,
    pub sim: SimConfig,
}

impl WorldMeta {
    fn to_kv_text(self) -> String {
        format!(
            "seed = {}\nlabel_noise = {}\nfault_rate = {}\ntop_k = {}\n",
            self.seed, self.sim.label_noise, self.sim.fault_rate, self.sim.top_k
        )
    }

    fn from_kv_text(text: &str) -> Result<Self, KvError> {
        let mut meta = WorldMeta {
            seed: 0,
            sim: SimConfig::default(),
        };
        for e in parse_kv(text)? {
            let v = e.value.as_str();
            match e.key.as_str() {
                "seed" => meta.seed = e.parse(v)?,
                "label_noise" => meta.sim.label_noise = e.parse(v)?,
                "fault_rate" => meta.sim.fault_rate = e.parse(v)?,
                "top_k" => meta.sim.top_k = e.parse(v)?,
                _ => return Err(e.unknown_key()),
            }
        }
        Ok(meta)
    }
}

pub fn write_world(dir: &Path, world: &GeneratedWorld, sim: SimConfig) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_jsonl(&dir.join(DATASET_FILE), &world.dataset.questions)?;
    write_jsonl(&dir.join(CORPUS_FILE), &world.corpus)?;
    let mut knowledge: Vec<_> = world.knowledge.answers.iter().collect();
    knowledge.sort();
    write_jsonl(
        &dir.join(KNOWLEDGE_FILE),
        knowledge.into_iter().map(|(id, answer)| KnowledgeRecord {
            id: id.clone(),
            answer: answer.clone(),
        }),
    )?;
    let meta = WorldMeta {
        seed: world.dataset.seed,
        sim,
    };
    let conf = dir.join(WORLD_CONF_FILE);
    fs::write(&conf, meta.to_kv_text()).map_err(io_err(&conf))
}

pub fn read_world_meta(dir: &Path) -> Result<WorldMeta, StoreError> {
    let path = dir.join(WORLD_CONF_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    WorldMeta::from_kv_text(&text).map_err(|source| StoreError::Config { path, source })
}

pub fn read_world(dir: &Path) -> Result<World, StoreError> {
    let meta = read_world_meta(dir)?;
    let dataset = read_dataset(&dir.join(DATASET_FILE), meta.seed)?;
    let corpus = read_corpus_file(&dir.join(CORPUS_FILE))?;
    let knowledge = InternalKnowledge {
        answers: read_jsonl::<KnowledgeRecord>(&dir.join(KNOWLEDGE_FILE))?
            .into_iter()
            .map(|r| (r.id, r.answer))
            .collect(),
    };
    Ok(World::new(dataset, corpus, knowledge, meta.sim)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamsFile {
    feature_dim: usize,
    weights: Vec<f64>,
}

pub fn params_to_json(params: &PolicyParams) -> String {
    serde_json::to_string_pretty(&ParamsFile {
        feature_dim: params.feature_dim(),
        weights: params.weights.clone(),
    })
    .expect("plain data serializes")
}

pub fn params_from_json(text: &str) -> Result<PolicyParams, StoreError> {
    let file: ParamsFile =
        serde_json::from_str(text).map_err(|e| StoreError::Params(e.to_string()))?;
    if file.weights.len() != file.feature_dim {
        return Err(StoreError::Params(format!(
            "feature_dim {} but {} weights",
            file.feature_dim,
            file.weights.len()
        )));
    }
    PolicyParams::new(file.weights).map_err(|e| StoreError::Params(e.to_string()))
}

pub fn write_params(path: &Path, params: &PolicyParams) -> Result<(), StoreError> {
    fs::write(path, params_to_json(params)).map_err(io_err(path))
}

pub fn read_params(path: &Path) -> Result<PolicyParams, StoreError> {
    params_from_json(&fs::read_to_string(path).map_err(io_err(path))?)
}
