//! Ranking metrics (NDCG, MAP, precision, recall at k), run evaluation and
//! the experiment-matrix report.
//!
//! Conventions follow trec_eval: exponential gain `2^rel - 1` with a
//! `log2(rank + 1)` discount, average precision divided by
//! `min(|relevant|, k)`, and queries without any relevant judgment excluded
//! from averages.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::RankedList;

mod report;

pub use report::{run_experiment_matrix, ExperimentReport, ExperimentRow, AGGREGATION_NOTE};

/// query id -> chunk id -> graded relevance.
pub type Qrels = BTreeMap<String, BTreeMap<String, u32>>;

pub const DEFAULT_KS: [usize; 2] = [1, 3];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("qrels are empty")]
    EmptyQrels,
    #[error("no query in the qrels has a relevant judgment")]
    NothingScoreable,
    #[error("k values must be positive and non-empty")]
    BadKs,
    #[error("run contains query {0} more than once")]
    DuplicateRun(String),
}

fn rel_of(qrels: &BTreeMap<String, u32>, id: &str) -> u32 {
    qrels.get(id).copied().unwrap_or(0)
}

fn n_relevant(qrels: &BTreeMap<String, u32>) -> usize {
    qrels.values().filter(|&&r| r > 0).count()
}

/// Relevant hits in the top `k`, over `k` (even when fewer results exist).
pub fn precision_at_k(ranked: &[&str], qrels: &BTreeMap<String, u32>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|id| rel_of(qrels, id) > 0).count();
    hits as f64 / k as f64
}

pub fn recall_at_k(ranked: &[&str], qrels: &BTreeMap<String, u32>, k: usize) -> f64 {
    let total = n_relevant(qrels);
    if total == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|id| rel_of(qrels, id) > 0).count();
    hits as f64 / total as f64
}

pub fn average_precision_at_k(ranked: &[&str], qrels: &BTreeMap<String, u32>, k: usize) -> f64 {
    let denom = n_relevant(qrels).min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranked.iter().take(k).enumerate() {
        if rel_of(qrels, id) > 0 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

fn gain(rel: u32) -> f64 {
    2f64.powi(rel as i32) - 1.0
}

fn discount(rank0: usize) -> f64 {
    ((rank0 + 2) as f64).log2()
}

/// `None` when the ideal DCG is zero, i.e. nothing relevant is judged.
pub fn ndcg_at_k(ranked: &[&str], qrels: &BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let mut ideal: Vec<u32> = qrels.values().copied().filter(|&r| r > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, &r)| gain(r) / discount(i)).sum();
    if idcg == 0.0 {
        return None;
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, id)| gain(rel_of(qrels, id)) / discount(i))
        .sum();
    Some(dcg / idcg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ndcg,
    Map,
    Precision,
    Recall,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Ndcg, Metric::Map, Metric::Precision, Metric::Recall];

    pub fn label(&self) -> &'static str {
        match self {
            Metric::Ndcg => "NDCG",
            Metric::Map => "MAP",
            Metric::Precision => "P",
            Metric::Recall => "Recall",
        }
    }
}

/// Mean metric values per cutoff; each vector is parallel to `ks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub ks: Vec<usize>,
    pub ndcg: Vec<f64>,
    pub map: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub n_queries: usize,
    pub excluded_queries: usize,
    pub aggregated_score: f64,
}

impl MetricTable {
    pub fn get(&self, metric: Metric, k: usize) -> Option<f64> {
        let i = self.ks.iter().position(|&x| x == k)?;
        Some(match metric {
            Metric::Ndcg => self.ndcg[i],
            Metric::Map => self.map[i],
            Metric::Precision => self.precision[i],
            Metric::Recall => self.recall[i],
        })
    }

    pub fn cells(&self) -> impl Iterator<Item = (Metric, usize, f64)> + '_ {
        Metric::ALL
            .into_iter()
            .flat_map(move |m| self.ks.iter().map(move |&k| (m, k, self.get(m, k).expect("k in table"))))
    }
}

/// Unweighted mean of every metric cell, as a percentage.
pub fn aggregate_score(table: &MetricTable) -> f64 {
    let cells: Vec<f64> = table.cells().map(|(_, _, v)| v).collect();
    if cells.is_empty() {
        return 0.0;
    }
    cells.iter().sum::<f64>() / cells.len() as f64 * 100.0
}

/// Averages per-query metrics over every query with at least one relevant
/// judgment. Queries without a run score zero; runs for unjudged queries are
/// ignored with a warning. Sums run in query-id order, so the result does not
/// depend on scheduling.
pub fn evaluate_run(runs: &[RankedList], qrels: &Qrels, ks: &[usize]) -> Result<MetricTable, EvalError> {
    if qrels.is_empty() {
        return Err(EvalError::EmptyQrels);
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(EvalError::BadKs);
    }
    let mut by_query: BTreeMap<&str, &RankedList> = BTreeMap::new();
    for r in runs {
        if by_query.insert(r.query_id.as_str(), r).is_some() {
            return Err(EvalError::DuplicateRun(r.query_id.clone()));
        }
        if !qrels.contains_key(&r.query_id) {
            tracing::warn!(query_id = %r.query_id, "run query has no qrels; ignored");
        }
    }
    let judged: Vec<(&String, &BTreeMap<String, u32>)> = qrels.iter().collect();
    let excluded: Vec<&str> = judged
        .iter()
        .filter(|(_, q)| n_relevant(q) == 0)
        .map(|(id, _)| id.as_str())
        .collect();
    for id in &excluded {
        tracing::warn!(query_id = %id, "query has no relevant judgments; excluded from averages");
    }
    let per_query: Vec<Vec<[f64; 4]>> = judged
        .par_iter()
        .filter(|(_, q)| n_relevant(q) > 0)
        .map(|(id, q)| {
            let ranked: Vec<&str> = by_query.get(id.as_str()).map(|r| r.chunk_ids()).unwrap_or_default();
            ks.iter()
                .map(|&k| {
                    [
                        ndcg_at_k(&ranked, q, k).unwrap_or(0.0),
                        average_precision_at_k(&ranked, q, k),
                        precision_at_k(&ranked, q, k),
                        recall_at_k(&ranked, q, k),
                    ]
                })
                .collect()
        })
        .collect();
    let n = per_query.len();
    if n == 0 {
        return Err(EvalError::NothingScoreable);
    }
    let mut sums = vec![[0.0f64; 4]; ks.len()];
    for q in &per_query {
        for (s, v) in sums.iter_mut().zip(q) {
            for m in 0..4 {
                s[m] += v[m];
            }
        }
    }
    let col = |m: usize| sums.iter().map(|s| s[m] / n as f64).collect::<Vec<_>>();
    let mut table = MetricTable {
        ks: ks.to_vec(),
        ndcg: col(0),
        map: col(1),
        precision: col(2),
        recall: col(3),
        n_queries: n,
        excluded_queries: excluded.len(),
        aggregated_score: 0.0,
    };
    table.aggregated_score = aggregate_score(&table);
    Ok(table)
}
