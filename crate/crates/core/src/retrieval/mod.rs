//! Exact dense and late-interaction search, reranking, pipelines, hard-negative
//! mining and training-manifest export.
//!
//! Every ranking orders by score descending and breaks ties by chunk id
//! ascending, so results are total and reproducible.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Chunk;
use crate::embed::EmbedError;

mod dense;
mod late;
mod manifest;
mod mining;
mod pipeline;
mod rerank;

pub use dense::{build_dense_index, dense_search, DenseIndex};
pub use late::{build_late_index, late_interaction_search, maxsim_score, LateInteractionIndex};
pub use manifest::{
    export_training_manifest, shape_records, HyperparamPreset, TrainingFormat, TrainingManifest, TrainingRecord,
};
pub use mining::{mine_hard_negatives, MiningConfig};
pub use pipeline::{
    Pipeline, PipelineConfig, ProviderRegistry, RerankerKind, RetrieverKind, DEFAULT_K_FINAL, DEFAULT_K_RETRIEVE,
};
pub use rerank::{rerank, Reranker};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("index is empty")]
    EmptyIndex,
    #[error("duplicate chunk id {0}")]
    DuplicateChunk(String),
    #[error("unknown chunk id {0}")]
    UnknownChunk(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimsMismatch { expected: usize, got: usize },
    #[error("unknown provider {name:?} ({kind})")]
    UnknownProvider { name: String, kind: &'static str },
    #[error("invalid pipeline {name}: {reason}")]
    InvalidPipeline { name: String, reason: String },
    #[error("corpus has {corpus} chunks, mining {n_neg} negatives needs at least {needed}")]
    CorpusTooSmall { corpus: usize, n_neg: usize, needed: usize },
    #[error("query {query_id}: only {available} non-relevant chunks for {n_neg} negatives")]
    NotEnoughNegatives {
        query_id: String,
        available: usize,
        n_neg: usize,
    },
    #[error("record {index}: {reason}")]
    BadRecord { index: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    pub score: f64,
}

/// One system's ranked output for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<ScoredChunk>,
    pub provenance: String,
}

pub(crate) fn rank_order(a: &ScoredChunk, b: &ScoredChunk) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.chunk_id.cmp(&b.chunk_id))
}

impl RankedList {
    /// Sorts by score descending, chunk id ascending, and keeps the top `k`.
    pub fn from_scores(query_id: &str, mut entries: Vec<ScoredChunk>, k: usize, provenance: &str) -> Self {
        if k == 0 {
            entries.clear();
        } else if entries.len() > k {
            entries.select_nth_unstable_by(k - 1, rank_order);
            entries.truncate(k);
        }
        entries.sort_by(rank_order);
        RankedList {
            query_id: query_id.to_string(),
            entries,
            provenance: provenance.to_string(),
        }
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }

    pub fn chunk_ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.chunk_id.as_str()).collect()
    }

    /// Checks ordering and uniqueness; a failure here is a bug upstream.
    pub fn check_order(&self) -> Result<(), String> {
        for w in self.entries.windows(2) {
            if rank_order(&w[0], &w[1]) != Ordering::Less {
                return Err(format!(
                    "query {}: {} ({}) ranked above {} ({})",
                    self.query_id, w[0].chunk_id, w[0].score, w[1].chunk_id, w[1].score
                ));
            }
        }
        Ok(())
    }
}

/// Chunks in corpus order with id lookup.
#[derive(Debug, Clone, Default)]
pub struct ChunkStore {
    chunks: Vec<Chunk>,
    by_id: HashMap<String, usize>,
}

impl ChunkStore {
    pub fn new(chunks: Vec<Chunk>) -> Result<Self, RetrievalError> {
        let mut by_id = HashMap::with_capacity(chunks.len());
        for (i, c) in chunks.iter().enumerate() {
            if by_id.insert(c.id.clone(), i).is_some() {
                return Err(RetrievalError::DuplicateChunk(c.id.clone()));
            }
        }
        Ok(ChunkStore { chunks, by_id })
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Chunk> {
        self.by_id.get(id).map(|&i| &self.chunks[i])
    }

    pub fn text(&self, id: &str) -> Result<&str, RetrievalError> {
        self.get(id)
            .map(|c| c.text.as_str())
            .ok_or_else(|| RetrievalError::UnknownChunk(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }
}

/// Writes `query_id Q0 chunk_id rank score name`, one line per entry.
pub fn write_trec_run(path: &Path, runs: &[RankedList], name: &str) -> Result<(), RetrievalError> {
    let mut out = Vec::new();
    for run in runs {
        for (rank, e) in run.entries.iter().enumerate() {
            writeln!(out, "{} Q0 {} {} {} {}", run.query_id, e.chunk_id, rank + 1, e.score, name).expect("write to vec");
        }
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads a six-column run file back into ranked lists, ordered by query id.
pub fn read_trec_run(path: &Path) -> Result<Vec<RankedList>, RetrievalError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut by_query: std::collections::BTreeMap<String, (String, Vec<(usize, ScoredChunk)>)> = Default::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| RetrievalError::BadRecord {
            index: i + 1,
            reason: format!("{}: {reason}", path.display()),
        };
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [qid, _, cid, rank, score, name] = cols[..] else {
            return Err(bad("expected 6 columns"));
        };
        let rank: usize = rank.parse().map_err(|_| bad("bad rank"))?;
        let score: f64 = score.parse().map_err(|_| bad("bad score"))?;
        let entry = by_query.entry(qid.to_string()).or_insert_with(|| (name.to_string(), Vec::new()));
        entry.1.push((
            rank,
            ScoredChunk {
                chunk_id: cid.to_string(),
                score,
            },
        ));
    }
    Ok(by_query
        .into_iter()
        .map(|(query_id, (provenance, mut rows))| {
            rows.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| rank_order(&a.1, &b.1)));
            RankedList {
                query_id,
                entries: rows.into_iter().map(|(_, e)| e).collect(),
                provenance,
            }
        })
        .collect())
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> RetrievalError {
    RetrievalError::Io {
        path: path.display().to_string(),
        source,
    }
}
