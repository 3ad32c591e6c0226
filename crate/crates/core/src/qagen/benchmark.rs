//! Query/qrels files and question-chunk pair assembly.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CandidateQuestion, QAPair, QagenError, QuestionType};

/// One line of a queries JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_type: Option<QuestionType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_id_hint: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Benchmark {
    pub queries: Vec<Query>,
    pub qrels: BTreeMap<String, BTreeMap<String, u32>>,
}

fn io_err(path: &Path, source: std::io::Error) -> QagenError {
    QagenError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> QagenError {
    QagenError::Malformed {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Numbers curated candidates as `q00000`, `q00001`, ... and drops questions
/// whose text (case-insensitively) was already paired with any chunk, since a
/// question with two gold chunks would contradict binary single-chunk relevance.
pub fn build_pairs(candidates: &[CandidateQuestion]) -> (Vec<QAPair>, Vec<Query>) {
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    let mut queries = Vec::new();
    for c in candidates {
        let question = c.question.trim();
        if question.is_empty() || !seen.insert(question.to_lowercase()) {
            continue;
        }
        let query_id = format!("q{:05}", pairs.len());
        pairs.push(QAPair {
            query_id: query_id.clone(),
            question: question.to_string(),
            chunk_id: c.chunk_id.clone(),
            relevance: 1,
        });
        queries.push(Query {
            query_id,
            question: question.to_string(),
            q_type: Some(c.q_type),
            chunk_id_hint: Some(c.chunk_id.clone()),
        });
    }
    (pairs, queries)
}

pub fn load_queries(path: &Path) -> Result<Vec<Query>, QagenError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: Query = serde_json::from_str(line).map_err(|e| malformed(path, i + 1, e.to_string()))?;
        if q.query_id.is_empty() || q.question.trim().is_empty() {
            return Err(malformed(path, i + 1, "empty query_id or question"));
        }
        if !ids.insert(q.query_id.clone()) {
            return Err(malformed(path, i + 1, format!("duplicate query_id {}", q.query_id)));
        }
        out.push(q);
    }
    Ok(out)
}

/// Reads `query_id<TAB>chunk_id<TAB>relevance`. The four-column TREC layout
/// (`query_id iter chunk_id relevance`) is accepted too.
pub fn load_qrels_tsv(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, u32>>, QagenError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut qrels: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let (qid, cid, rel) = match cols.as_slice() {
            [q, c, r] | [q, _, c, r] => (*q, *c, *r),
            _ => return Err(malformed(path, line_no, format!("expected 3 columns, got {}", cols.len()))),
        };
        let rel: u32 = rel
            .parse()
            .map_err(|_| malformed(path, line_no, format!("bad relevance {rel:?}")))?;
        let entry = qrels.entry(qid.to_string()).or_default();
        if entry.insert(cid.to_string(), rel).is_some() {
            return Err(QagenError::DuplicateJudgment {
                path: path.display().to_string(),
                line: line_no,
                query_id: qid.to_string(),
                chunk_id: cid.to_string(),
            });
        }
    }
    Ok(qrels)
}

fn check_chunks<'a>(
    chunk_ids: impl Iterator<Item = &'a str>,
    known_chunks: &HashSet<String>,
) -> Result<(), QagenError> {
    let mut dangling: Vec<String> = chunk_ids
        .filter(|c| !known_chunks.contains(*c))
        .map(str::to_string)
        .collect();
    if dangling.is_empty() {
        return Ok(());
    }
    dangling.sort();
    dangling.dedup();
    Err(QagenError::DanglingChunks(dangling))
}

/// Loads queries and qrels; with `known_chunks`, every judged chunk must exist.
pub fn load_benchmark(
    queries_path: &Path,
    qrels_path: &Path,
    known_chunks: Option<&HashSet<String>>,
) -> Result<Benchmark, QagenError> {
    let queries = load_queries(queries_path)?;
    let qrels = load_qrels_tsv(qrels_path)?;
    if let Some(known) = known_chunks {
        check_chunks(qrels.values().flat_map(|m| m.keys().map(String::as_str)), known)?;
    }
    Ok(Benchmark { queries, qrels })
}

/// Writes pairs as qrels, refusing any pair whose chunk is not in the store.
pub fn write_qrels_tsv(path: &Path, pairs: &[QAPair], known_chunks: &HashSet<String>) -> Result<(), QagenError> {
    check_chunks(pairs.iter().map(|p| p.chunk_id.as_str()), known_chunks)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut out = Vec::new();
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", p.query_id, p.chunk_id, p.relevance).expect("write to vec");
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}
