use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, ChunkStore, RetrievalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingFormat {
    /// `[query, positive]`
    Pair,
    /// `[query, positive, negative]`
    Triplet,
    /// `[query, positive, negative, negative, ...]`
    MultiNegative,
}

impl TrainingFormat {
    fn check(&self, negatives: usize) -> Result<(), String> {
        match self {
            TrainingFormat::Pair if negatives != 0 => Err(format!("pair format takes no negatives, got {negatives}")),
            TrainingFormat::Triplet if negatives != 1 => Err(format!("triplet format takes exactly 1 negative, got {negatives}")),
            TrainingFormat::MultiNegative if negatives < 2 => {
                Err(format!("multi_negative format takes at least 2 negatives, got {negatives}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub query_id: String,
    pub query: String,
    pub positive_id: String,
    pub negative_ids: Vec<String>,
}

/// Fine-tuning recipes for the three model roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperparamPreset {
    BiEncoder,
    CrossEncoder,
    Colbert,
}

impl HyperparamPreset {
    pub fn format(&self) -> TrainingFormat {
        match self {
            HyperparamPreset::BiEncoder => TrainingFormat::Pair,
            HyperparamPreset::CrossEncoder | HyperparamPreset::Colbert => TrainingFormat::Triplet,
        }
    }

    pub fn hyperparams(&self) -> BTreeMap<String, String> {
        let pairs: &[(&str, &str)] = match self {
            HyperparamPreset::BiEncoder => &[
                ("epochs", "3"),
                ("warmup_steps", "400"),
                ("weight_decay", "0.01"),
                ("scheduler", "WarmupLinear"),
                ("learning_rate", "1e-5"),
            ],
            HyperparamPreset::CrossEncoder => &[
                ("weight_decay", "0.01"),
                ("scheduler", "WarmupLinear"),
                ("epochs", "3"),
                ("train_batch_size", "16"),
                ("warmup_steps", "400"),
                ("learning_rate", "1e-5"),
            ],
            HyperparamPreset::Colbert => &[
                ("train_batch_size", "32"),
                ("learning_rate", "5e-6"),
                ("warmup_steps", "10% of total steps"),
            ],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub format: TrainingFormat,
    pub records: Vec<TrainingRecord>,
    pub hyperparams: BTreeMap<String, String>,
}

/// Cuts mined negatives down to what `format` takes: none for pairs, the
/// hardest one for triplets, all of them otherwise.
pub fn shape_records(records: &[TrainingRecord], format: TrainingFormat) -> Vec<TrainingRecord> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            match format {
                TrainingFormat::Pair => r.negative_ids.clear(),
                TrainingFormat::Triplet => r.negative_ids.truncate(1),
                TrainingFormat::MultiNegative => {}
            }
            r
        })
        .collect()
}

#[derive(Serialize)]
struct ExportLine<'a> {
    query: &'a str,
    positive: &'a str,
    negatives: Vec<&'a str>,
    query_id: &'a str,
    positive_id: &'a str,
    negative_ids: &'a [String],
}

#[derive(Serialize)]
struct Sidecar<'a> {
    format: TrainingFormat,
    records: usize,
    hyperparams: &'a BTreeMap<String, String>,
}

impl TrainingManifest {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        for (index, r) in self.records.iter().enumerate() {
            let bad = |reason: String| RetrievalError::BadRecord { index, reason };
            self.format.check(r.negative_ids.len()).map_err(bad)?;
            if r.negative_ids.contains(&r.positive_id) {
                return Err(bad(format!("positive {} listed as a negative", r.positive_id)));
            }
            if r.negative_ids.iter().collect::<HashSet<_>>().len() != r.negative_ids.len() {
                return Err(bad("repeated negative".into()));
            }
        }
        Ok(())
    }

    /// Writes one JSON line per record and `manifest.json` next to it.
    /// Returns the sidecar path.
    pub fn export(&self, path: &Path, store: &ChunkStore) -> Result<PathBuf, RetrievalError> {
        self.validate()?;
        let mut out = String::new();
        for r in &self.records {
            let line = ExportLine {
                query: &r.query,
                positive: store.text(&r.positive_id)?,
                negatives: r.negative_ids.iter().map(|n| store.text(n)).collect::<Result<_, _>>()?,
                query_id: &r.query_id,
                positive_id: &r.positive_id,
                negative_ids: &r.negative_ids,
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable record"));
            out.push('\n');
        }
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        fs::write(path, out).map_err(|e| io_err(path, e))?;
        let sidecar = dir.join("manifest.json");
        let meta = Sidecar {
            format: self.format,
            records: self.records.len(),
            hyperparams: &self.hyperparams,
        };
        let json = serde_json::to_string_pretty(&meta).expect("serializable sidecar");
        fs::write(&sidecar, json + "\n").map_err(|e| io_err(&sidecar, e))?;
        Ok(sidecar)
    }
}

pub fn export_training_manifest(
    records: &[TrainingRecord],
    format: TrainingFormat,
    hyperparams: BTreeMap<String, String>,
    path: &Path,
    store: &ChunkStore,
) -> Result<PathBuf, RetrievalError> {
    TrainingManifest {
        format,
        records: records.to_vec(),
        hyperparams,
    }
    .export(path, store)
}
