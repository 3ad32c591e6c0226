use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{evaluate_run, Metric, MetricTable, Qrels};
use crate::qagen::Query;
use crate::retrieval::{Pipeline, PipelineConfig};

pub const AGGREGATION_NOTE: &str =
    "Score is the unweighted mean of NDCG, MAP, Precision and Recall over every listed cutoff, as a percentage.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub exp: usize,
    pub pipeline: String,
    pub retriever: String,
    pub reranker: String,
    pub metrics: Option<MetricTable>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub config_hash: String,
    pub timestamp: String,
    pub complete: bool,
    pub aggregation: String,
}

impl ExperimentReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Experiment report\n");
        let _ = writeln!(out, "config: `{}`", self.config_hash);
        let _ = writeln!(out, "generated: {}\n", self.timestamp);
        let _ = writeln!(out, "{}\n", self.aggregation);
        if !self.complete {
            let _ = writeln!(out, "**Partial run: at least one row failed.**\n");
        }
        let _ = writeln!(out, "| Exp # | Retrieval Model | Reranking Model | Score |");
        let _ = writeln!(out, "|---|---|---|---|");
        for r in &self.rows {
            let score = match (&r.metrics, &r.error) {
                (Some(m), _) => format!("{:.1}%", m.aggregated_score),
                (None, Some(e)) => format!("failed: {}", e.replace('|', "\\|")),
                (None, None) => "failed".to_string(),
            };
            let _ = writeln!(out, "| {} | {} | {} | {} |", r.exp, r.retriever, r.reranker, score);
        }
        let Some(ks) = self.rows.iter().find_map(|r| r.metrics.as_ref()).map(|m| m.ks.clone()) else {
            return out;
        };
        let _ = writeln!(out, "\n## All cells\n");
        let mut header = String::from("| Exp # | Pipeline | Queries |");
        let mut rule = String::from("|---|---|---|");
        for m in Metric::ALL {
            for k in &ks {
                let _ = write!(header, " {}@{k} |", m.label());
                rule.push_str("---|");
            }
        }
        let _ = writeln!(out, "{header}\n{rule}");
        for r in &self.rows {
            let Some(t) = &r.metrics else { continue };
            let mut line = format!("| {} | {} | {} |", r.exp, r.pipeline, t.n_queries);
            for (_, _, v) in t.cells() {
                let _ = write!(line, " {v:.4} |");
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Runs every config over all benchmark queries, in config order. A failing
/// row is recorded and the run continues.
pub fn run_experiment_matrix(
    configs: &[PipelineConfig],
    pipeline: &Pipeline,
    queries: &[Query],
    qrels: &Qrels,
    ks: &[usize],
    config_hash: &str,
) -> ExperimentReport {
    let pairs: Vec<(String, String)> = queries.iter().map(|q| (q.query_id.clone(), q.question.clone())).collect();
    let rows: Vec<ExperimentRow> = configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let result = pipeline
                .run_all(cfg, &pairs)
                .map_err(|e| e.to_string())
                .and_then(|runs| evaluate_run(&runs, qrels, ks).map_err(|e| e.to_string()));
            if let Err(e) = &result {
                tracing::error!(pipeline = %cfg.name, error = %e, "experiment row failed");
            }
            let (metrics, error) = match result {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e)),
            };
            ExperimentRow {
                exp: i + 1,
                pipeline: cfg.name.clone(),
                retriever: cfg.retriever_display().to_string(),
                reranker: cfg.reranker_display().to_string(),
                metrics,
                error,
            }
        })
        .collect();
    ExperimentReport {
        complete: rows.iter().all(|r| r.metrics.is_some()),
        rows,
        config_hash: config_hash.to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        aggregation: AGGREGATION_NOTE.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;
    use crate::embed::{OracleEmbedder, StubEmbedder};
    use crate::qagen::QAPair;
    use crate::retrieval::{ChunkStore, ProviderRegistry, RerankerKind, RetrieverKind};
    use std::sync::Arc;

    fn fixture() -> (Pipeline, Vec<Query>, Qrels) {
        let chunks: Vec<Chunk> = (0..8)
            .map(|i| Chunk {
                id: format!("c{i}"),
                doc_id: "d".into(),
                seq: i,
                text: format!("chunk text number {i}"),
                token_count: 4,
                overlap_prefix_tokens: 0,
            })
            .collect();
        let pairs: Vec<QAPair> = (0..8)
            .map(|i| QAPair {
                query_id: format!("q{i}"),
                question: format!("what is number {i}?"),
                chunk_id: format!("c{i}"),
                relevance: 1,
            })
            .collect();
        let mut reg = ProviderRegistry::default();
        reg.text.insert("oracle".into(), Arc::new(OracleEmbedder::new(&pairs, &chunks, 8).unwrap()));
        reg.text.insert("stub".into(), Arc::new(StubEmbedder::new(1, 16).unwrap()));
        let queries = pairs
            .iter()
            .map(|p| Query {
                query_id: p.query_id.clone(),
                question: p.question.clone(),
                q_type: None,
                chunk_id_hint: None,
            })
            .collect();
        let qrels = pairs
            .iter()
            .map(|p| (p.query_id.clone(), [(p.chunk_id.clone(), 1)].into()))
            .collect();
        (Pipeline::new(Arc::new(ChunkStore::new(chunks).unwrap()), reg), queries, qrels)
    }

    fn cfg(name: &str, provider: &str) -> PipelineConfig {
        PipelineConfig {
            name: name.into(),
            retriever: RetrieverKind::Dense,
            retriever_provider: provider.into(),
            reranker: RerankerKind::None,
            reranker_provider: None,
            k_retrieve: 5,
            k_final: 5,
            retriever_label: Some(format!("Label {provider}")),
            reranker_label: None,
        }
    }

    #[test]
    fn oracle_row_is_perfect_and_failures_continue() {
        let (p, q, qrels) = fixture();
        let configs = [cfg("a", "oracle"), cfg("b", "missing"), cfg("c", "stub")];
        let report = run_experiment_matrix(&configs, &p, &q, &qrels, &[1, 3], "abc");
        assert_eq!(report.rows.len(), 3);
        let first = report.rows[0].metrics.as_ref().unwrap();
        // P@3 is 1/3 with a single relevant chunk; every other cell is 1
        assert_eq!(first.get(Metric::Ndcg, 3), Some(1.0));
        assert!(report.rows[1].error.as_ref().unwrap().contains("missing"));
        assert!(!report.complete);
        let md = report.to_markdown();
        assert!(md.contains("| 1 | Label oracle | <none> |"));
        assert!(md.contains("| 2 | Label missing | <none> | failed:"));
    }

    #[test]
    fn deterministic_except_timestamp() {
        let (p, q, qrels) = fixture();
        let configs = [cfg("a", "stub")];
        let mut a = run_experiment_matrix(&configs, &p, &q, &qrels, &[1, 3], "h");
        let mut b = run_experiment_matrix(&configs, &p, &q, &qrels, &[1, 3], "h");
        a.timestamp.clear();
        b.timestamp.clear();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_markdown(), b.to_markdown());
    }
}
