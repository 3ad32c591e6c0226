use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_dense_index, build_late_index, late_interaction_search, rerank, dense_search, ChunkStore, DenseIndex,
    LateInteractionIndex, RankedList, Reranker, RetrievalError,
};
use crate::embed::{PairScorer, TextEmbedder, TokenEmbedder};

pub const DEFAULT_K_RETRIEVE: usize = 50;
pub const DEFAULT_K_FINAL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverKind {
    Dense,
    LateInteraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankerKind {
    #[default]
    None,
    PairScorer,
    LateInteraction,
}

fn default_k_retrieve() -> usize {
    DEFAULT_K_RETRIEVE
}

fn default_k_final() -> usize {
    DEFAULT_K_FINAL
}

/// One retriever/reranker combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub name: String,
    pub retriever: RetrieverKind,
    pub retriever_provider: String,
    #[serde(default)]
    pub reranker: RerankerKind,
    #[serde(default)]
    pub reranker_provider: Option<String>,
    #[serde(default = "default_k_retrieve")]
    pub k_retrieve: usize,
    #[serde(default = "default_k_final")]
    pub k_final: usize,
    /// Display names for reports; the provider names are used when absent.
    #[serde(default)]
    pub retriever_label: Option<String>,
    #[serde(default)]
    pub reranker_label: Option<String>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        let bad = |reason: &str| RetrievalError::InvalidPipeline {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(bad("name is empty"));
        }
        if self.k_final == 0 || self.k_retrieve == 0 {
            return Err(bad("k_retrieve and k_final must be positive"));
        }
        if self.k_final > self.k_retrieve {
            return Err(bad("k_final exceeds k_retrieve"));
        }
        match (self.reranker, &self.reranker_provider) {
            (RerankerKind::None, Some(_)) => Err(bad("reranker_provider given without a reranker")),
            (RerankerKind::PairScorer | RerankerKind::LateInteraction, None) => Err(bad("reranker needs a reranker_provider")),
            _ => Ok(()),
        }
    }

    pub fn retriever_display(&self) -> &str {
        self.retriever_label.as_deref().unwrap_or(&self.retriever_provider)
    }

    pub fn reranker_display(&self) -> &str {
        match (&self.reranker_label, &self.reranker_provider) {
            (Some(l), _) => l,
            (None, Some(p)) => p,
            (None, None) => "<none>",
        }
    }
}

/// Named providers, one map per model role.
#[derive(Default, Clone)]
pub struct ProviderRegistry {
    pub text: BTreeMap<String, Arc<dyn TextEmbedder>>,
    pub token: BTreeMap<String, Arc<dyn TokenEmbedder>>,
    pub scorer: BTreeMap<String, Arc<dyn PairScorer>>,
}

impl ProviderRegistry {
    pub fn text(&self, name: &str) -> Result<&Arc<dyn TextEmbedder>, RetrievalError> {
        self.text.get(name).ok_or_else(|| RetrievalError::UnknownProvider {
            name: name.to_string(),
            kind: "text embedder",
        })
    }

    pub fn token(&self, name: &str) -> Result<&Arc<dyn TokenEmbedder>, RetrievalError> {
        self.token.get(name).ok_or_else(|| RetrievalError::UnknownProvider {
            name: name.to_string(),
            kind: "token embedder",
        })
    }

    pub fn scorer(&self, name: &str) -> Result<&Arc<dyn PairScorer>, RetrievalError> {
        self.scorer.get(name).ok_or_else(|| RetrievalError::UnknownProvider {
            name: name.to_string(),
            kind: "pair scorer",
        })
    }

    /// Checks that every provider the config names exists in the right role.
    pub fn resolve(&self, cfg: &PipelineConfig) -> Result<(), RetrievalError> {
        cfg.validate()?;
        match cfg.retriever {
            RetrieverKind::Dense => self.text(&cfg.retriever_provider).map(|_| ())?,
            RetrieverKind::LateInteraction => self.token(&cfg.retriever_provider).map(|_| ())?,
        }
        match (cfg.reranker, cfg.reranker_provider.as_deref()) {
            (RerankerKind::PairScorer, Some(p)) => self.scorer(p).map(|_| ()),
            (RerankerKind::LateInteraction, Some(p)) => self.token(p).map(|_| ()),
            _ => Ok(()),
        }
    }
}

/// A corpus plus providers. Indexes are built on first use and cached per
/// provider, so pipelines sharing a retriever share its index.
pub struct Pipeline {
    store: Arc<ChunkStore>,
    registry: ProviderRegistry,
    dense: Mutex<HashMap<String, Arc<DenseIndex>>>,
    late: Mutex<HashMap<String, Arc<LateInteractionIndex>>>,
}

impl Pipeline {
    pub fn new(store: Arc<ChunkStore>, registry: ProviderRegistry) -> Self {
        Pipeline {
            store,
            registry,
            dense: Mutex::new(HashMap::new()),
            late: Mutex::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &ChunkStore {
        &self.store
    }

    pub fn registry(&self) -> &ProviderRegistry {
        &self.registry
    }

    pub fn dense_index(&self, provider: &str) -> Result<Arc<DenseIndex>, RetrievalError> {
        let embedder = self.registry.text(provider)?;
        let mut cache = self.dense.lock().expect("index cache poisoned");
        if let Some(idx) = cache.get(provider) {
            return Ok(idx.clone());
        }
        let idx = Arc::new(build_dense_index(self.store.chunks(), embedder.as_ref())?);
        cache.insert(provider.to_string(), idx.clone());
        Ok(idx)
    }

    pub fn late_index(&self, provider: &str) -> Result<Arc<LateInteractionIndex>, RetrievalError> {
        let embedder = self.registry.token(provider)?;
        let mut cache = self.late.lock().expect("index cache poisoned");
        if let Some(idx) = cache.get(provider) {
            return Ok(idx.clone());
        }
        let idx = Arc::new(build_late_index(self.store.chunks(), embedder.as_ref())?);
        cache.insert(provider.to_string(), idx.clone());
        Ok(idx)
    }

    /// Retrieves `k_retrieve`, reranks if configured, keeps `k_final`.
    pub fn run(&self, cfg: &PipelineConfig, query_id: &str, query: &str) -> Result<RankedList, RetrievalError> {
        self.registry.resolve(cfg)?;
        let stage = format!("{}:{}", kind_name(cfg.retriever), cfg.retriever_provider);
        let mut list = match cfg.retriever {
            RetrieverKind::Dense => {
                let idx = self.dense_index(&cfg.retriever_provider)?;
                let e = self.registry.text(&cfg.retriever_provider)?;
                dense_search(&idx, query_id, query, e.as_ref(), cfg.k_retrieve, &stage)?
            }
            RetrieverKind::LateInteraction => {
                let idx = self.late_index(&cfg.retriever_provider)?;
                let e = self.registry.token(&cfg.retriever_provider)?;
                late_interaction_search(&idx, query_id, query, e.as_ref(), cfg.k_retrieve, &stage)?
            }
        };
        if let Some(provider) = cfg.reranker_provider.as_deref() {
            let stage = format!("{}:{provider}", rerank_name(cfg.reranker));
            list = match cfg.reranker {
                RerankerKind::PairScorer => {
                    let s = self.registry.scorer(provider)?;
                    rerank(&list, query, &self.store, &Reranker::Pair(s.as_ref()), &stage)?
                }
                RerankerKind::LateInteraction => {
                    let idx = self.late_index(provider)?;
                    let e = self.registry.token(provider)?;
                    let r = Reranker::LateInteraction {
                        embedder: e.as_ref(),
                        index: Some(&idx),
                    };
                    rerank(&list, query, &self.store, &r, &stage)?
                }
                RerankerKind::None => list,
            };
        }
        list.truncate(cfg.k_final);
        Ok(list)
    }

    /// Runs every `(query_id, text)` in parallel; output follows input order.
    pub fn run_all(&self, cfg: &PipelineConfig, queries: &[(String, String)]) -> Result<Vec<RankedList>, RetrievalError> {
        self.registry.resolve(cfg)?;
        // build indexes up front so workers do not queue on the cache lock
        match cfg.retriever {
            RetrieverKind::Dense => drop(self.dense_index(&cfg.retriever_provider)?),
            RetrieverKind::LateInteraction => drop(self.late_index(&cfg.retriever_provider)?),
        }
        if let (RerankerKind::LateInteraction, Some(p)) = (cfg.reranker, cfg.reranker_provider.as_deref()) {
            drop(self.late_index(p)?);
        }
        queries.par_iter().map(|(id, text)| self.run(cfg, id, text)).collect()
    }
}

fn kind_name(k: RetrieverKind) -> &'static str {
    match k {
        RetrieverKind::Dense => "dense",
        RetrieverKind::LateInteraction => "late_interaction",
    }
}

fn rerank_name(k: RerankerKind) -> &'static str {
    match k {
        RerankerKind::None => "none",
        RerankerKind::PairScorer => "pair_scorer",
        RerankerKind::LateInteraction => "late_interaction",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;
    use crate::embed::{StubEmbedder, StubPairScorer, StubTokenEmbedder};
    use crate::retrieval::maxsim_score;

    fn store() -> Arc<ChunkStore> {
        let chunks = (0..40)
            .map(|i| Chunk {
                id: format!("c{i:02}"),
                doc_id: "d".into(),
                seq: i,
                text: format!("topic{} detail{} common", i % 5, i % 9),
                token_count: 3,
                overlap_prefix_tokens: 0,
            })
            .collect();
        Arc::new(ChunkStore::new(chunks).unwrap())
    }

    fn registry() -> ProviderRegistry {
        let mut r = ProviderRegistry::default();
        r.text.insert("e5".into(), Arc::new(StubEmbedder::new(1, 32).unwrap()));
        r.token.insert("colbert".into(), Arc::new(StubTokenEmbedder::new(2, 16).unwrap()));
        r.scorer.insert("mxbai".into(), Arc::new(StubPairScorer::new(3)));
        r
    }

    fn cfg(retriever: RetrieverKind, rp: &str, reranker: RerankerKind, rr: Option<&str>) -> PipelineConfig {
        PipelineConfig {
            name: "t".into(),
            retriever,
            retriever_provider: rp.into(),
            reranker,
            reranker_provider: rr.map(str::to_string),
            k_retrieve: 10,
            k_final: 3,
            retriever_label: None,
            reranker_label: None,
        }
    }

    #[test]
    fn no_reranker_is_truncated_retrieval() {
        let p = Pipeline::new(store(), registry());
        let c = cfg(RetrieverKind::Dense, "e5", RerankerKind::None, None);
        let out = p.run(&c, "q", "topic2 detail4").unwrap();
        let idx = p.dense_index("e5").unwrap();
        let bare = dense_search(&idx, "q", "topic2 detail4", p.registry().text("e5").unwrap().as_ref(), 3, "x").unwrap();
        assert_eq!(out.chunk_ids(), bare.chunk_ids());
        assert_eq!(out.entries.len(), 3);
    }

    #[test]
    fn dense_then_maxsim_matches_composed_oracle() {
        let p = Pipeline::new(store(), registry());
        let c = cfg(RetrieverKind::Dense, "e5", RerankerKind::LateInteraction, Some("colbert"));
        let query = "topic1 detail3 common";
        let out = p.run(&c, "q", query).unwrap();

        let mut bare = cfg(RetrieverKind::Dense, "e5", RerankerKind::None, None);
        bare.k_final = 10;
        let first = p.run(&bare, "q", query).unwrap();
        let tok = StubTokenEmbedder::new(2, 16).unwrap();
        let mut qv = tok.embed_tokens(query, crate::embed::Role::Query).unwrap();
        qv.iter_mut().for_each(|v| {
            crate::embed::normalize(v);
        });
        let mut scored: Vec<(String, f64)> = first
            .chunk_ids()
            .iter()
            .map(|id| {
                let mut d = tok.embed_tokens(p.store().text(id).unwrap(), crate::embed::Role::Passage).unwrap();
                d.iter_mut().for_each(|v| {
                    crate::embed::normalize(v);
                });
                (id.to_string(), maxsim_score(&qv, &d).unwrap())
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let expect: Vec<&str> = scored.iter().take(3).map(|(id, _)| id.as_str()).collect();
        assert_eq!(out.chunk_ids(), expect);
        assert_eq!(out.provenance, "dense:e5>late_interaction:colbert");
    }

    #[test]
    fn every_combination_runs_and_is_deterministic() {
        let p = Pipeline::new(store(), registry());
        let configs = [
            cfg(RetrieverKind::Dense, "e5", RerankerKind::None, None),
            cfg(RetrieverKind::Dense, "e5", RerankerKind::PairScorer, Some("mxbai")),
            cfg(RetrieverKind::Dense, "e5", RerankerKind::LateInteraction, Some("colbert")),
            cfg(RetrieverKind::LateInteraction, "colbert", RerankerKind::None, None),
        ];
        let queries: Vec<(String, String)> = (0..12).map(|i| (format!("q{i}"), format!("topic{} common", i % 5))).collect();
        for c in &configs {
            let a = p.run_all(c, &queries).unwrap();
            let b = p.run_all(c, &queries).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().all(|r| r.entries.len() == 3 && r.check_order().is_ok()));
            assert_eq!(a[5].query_id, "q5");
        }
    }

    #[test]
    fn missing_provider_is_named() {
        let p = Pipeline::new(store(), registry());
        let err = p
            .run(&cfg(RetrieverKind::Dense, "e5", RerankerKind::PairScorer, Some("nope")), "q", "x")
            .unwrap_err();
        assert!(err.to_string().contains("nope"));
        let err = p.run(&cfg(RetrieverKind::LateInteraction, "e5", RerankerKind::None, None), "q", "x").unwrap_err();
        assert!(err.to_string().contains("token embedder"));
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(RetrieverKind::Dense, "e5", RerankerKind::None, Some("mxbai"));
        assert!(c.validate().is_err());
        c.reranker_provider = None;
        c.k_final = 20;
        assert!(c.validate().is_err());
        c.k_final = 3;
        assert!(c.validate().is_ok());
        c.reranker = RerankerKind::PairScorer;
        assert!(c.validate().is_err());
    }
}
