use std::sync::Arc;
use std::time::Duration;

use super::CliError;
use crate::config::{Config, ProviderDecl, ProviderRole, ProviderType};
use crate::corpus::Chunk;
use crate::embed::{
    FileEmbedder, FilePairScorer, FileTokenEmbedder, HttpEmbedder, HttpPairScorer, HttpTokenEmbedder, OracleEmbedder,
    StubEmbedder, StubPairScorer, StubTokenEmbedder,
};
use crate::http::HttpSettings;
use crate::qagen::{Benchmark, QAPair};
use crate::retrieval::ProviderRegistry;

const STUB_TEXT_DIMS: usize = 64;
const STUB_TOKEN_DIMS: usize = 32;
const HTTP_BATCH: usize = 32;

fn http_settings(p: &ProviderDecl) -> HttpSettings {
    let d = HttpSettings::default();
    HttpSettings {
        timeout: p.timeout_secs.map_or(d.timeout, Duration::from_secs),
        retries: p.retries.unwrap_or(d.retries),
        auth_token: p.auth_token.clone(),
        ..d
    }
}

/// Pairs every query with each chunk it is judged relevant to.
fn oracle_pairs(bench: &Benchmark) -> Vec<QAPair> {
    let mut pairs = Vec::new();
    for q in &bench.queries {
        let Some(judged) = bench.qrels.get(&q.query_id) else { continue };
        for (chunk_id, &rel) in judged {
            if rel > 0 {
                pairs.push(QAPair {
                    query_id: q.query_id.clone(),
                    question: q.question.clone(),
                    chunk_id: chunk_id.clone(),
                    relevance: rel,
                });
            }
        }
    }
    pairs
}

/// Instantiates the declared providers, or only those named in `only`.
/// Oracle providers need the benchmark.
pub fn build_registry(
    cfg: &Config,
    chunks: &[Chunk],
    bench: Option<&Benchmark>,
    only: Option<&[&str]>,
) -> Result<ProviderRegistry, CliError> {
    let mut reg = ProviderRegistry::default();
    for (name, p) in &cfg.providers {
        if only.is_some_and(|o| !o.contains(&name.as_str())) {
            continue;
        }
        let kind = *p.kind.get_ref();
        let at = |msg: String| CliError::from(cfg.error_at(p.kind.span(), format!("provider {name}: {msg}")));
        let seed = p.seed.unwrap_or(cfg.seed);
        let path = || p.path.as_ref().map(|x| cfg.resolve(x)).ok_or_else(|| at("needs `path`".into()));
        let url = || p.base_url.clone().ok_or_else(|| at("needs `base_url`".into()));
        let model = p.model.clone().unwrap_or_default();
        let batch = p.batch_size.unwrap_or(HTTP_BATCH);
        match (p.role, kind) {
            (ProviderRole::Text, ProviderType::Stub) => {
                let e = StubEmbedder::new(seed, p.dims.unwrap_or(STUB_TEXT_DIMS)).map_err(|e| at(e.to_string()))?;
                reg.text.insert(name.clone(), Arc::new(e));
            }
            (ProviderRole::Token, ProviderType::Stub) => {
                let e = StubTokenEmbedder::new(seed, p.dims.unwrap_or(STUB_TOKEN_DIMS)).map_err(|e| at(e.to_string()))?;
                reg.token.insert(name.clone(), Arc::new(e));
            }
            (ProviderRole::Scorer, ProviderType::Stub) => {
                reg.scorer.insert(name.clone(), Arc::new(StubPairScorer::new(seed)));
            }
            (ProviderRole::Text, ProviderType::File) => {
                reg.text.insert(name.clone(), Arc::new(FileEmbedder::load(&path()?)?));
            }
            (ProviderRole::Token, ProviderType::File) => {
                reg.token.insert(name.clone(), Arc::new(FileTokenEmbedder::load(&path()?)?));
            }
            (ProviderRole::Scorer, ProviderType::File) => {
                reg.scorer.insert(name.clone(), Arc::new(FilePairScorer::load(&path()?)?));
            }
            (ProviderRole::Text, ProviderType::Http) => {
                let e = HttpEmbedder::new(&url()?, &model, batch, p.dims, http_settings(p)).map_err(|e| at(e.to_string()))?;
                reg.text.insert(name.clone(), Arc::new(e));
            }
            (ProviderRole::Token, ProviderType::Http) => {
                let e = HttpTokenEmbedder::new(&url()?, &model, batch, p.dims, http_settings(p))
                    .map_err(|e| at(e.to_string()))?;
                reg.token.insert(name.clone(), Arc::new(e));
            }
            (ProviderRole::Scorer, ProviderType::Http) => {
                reg.scorer
                    .insert(name.clone(), Arc::new(HttpPairScorer::new(&url()?, &model, http_settings(p))));
            }
            (ProviderRole::Text, ProviderType::Oracle) => {
                let bench = bench.ok_or_else(|| at("oracle providers need [benchmark] queries and qrels".into()))?;
                let dims = p.dims.unwrap_or(chunks.len());
                let e = OracleEmbedder::new(&oracle_pairs(bench), chunks, dims).map_err(|e| at(e.to_string()))?;
                reg.text.insert(name.clone(), Arc::new(e));
            }
            (_, ProviderType::Oracle) => return Err(at("oracle providers must have role \"text\"".into())),
        }
    }
    Ok(reg)
}

/// True when one of the named providers needs the benchmark to be built.
pub(super) fn needs_benchmark(cfg: &Config, names: &[&str]) -> bool {
    names
        .iter()
        .filter_map(|n| cfg.providers.get(*n))
        .any(|p| *p.kind.get_ref() == ProviderType::Oracle)
}
