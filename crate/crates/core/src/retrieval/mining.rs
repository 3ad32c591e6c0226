use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ChunkStore, RankedList, RetrievalError, TrainingRecord};
use crate::qagen::QAPair;
use crate::seed::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub k: usize,
    pub n_neg: usize,
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig { k: 50, n_neg: 3, seed: 0 }
    }
}

/// Hardest negatives are the highest-ranked retrieved chunks that are not
/// relevant to the query. Short lists are padded by seeded uniform sampling
/// from the remaining non-relevant chunks; each pair has its own RNG stream.
pub fn mine_hard_negatives<F>(
    train_pairs: &[QAPair],
    store: &ChunkStore,
    retrieve: F,
    cfg: &MiningConfig,
) -> Result<Vec<TrainingRecord>, RetrievalError>
where
    F: Fn(&QAPair, usize) -> Result<RankedList, RetrievalError> + Sync,
{
    if cfg.n_neg > cfg.k {
        return Err(RetrievalError::InvalidPipeline {
            name: "mining".into(),
            reason: format!("n_neg {} exceeds k {}", cfg.n_neg, cfg.k),
        });
    }
    if store.len() < cfg.n_neg + 1 {
        return Err(RetrievalError::CorpusTooSmall {
            corpus: store.len(),
            n_neg: cfg.n_neg,
            needed: cfg.n_neg + 1,
        });
    }
    let mut relevant: HashMap<&str, HashSet<&str>> = HashMap::new();
    for p in train_pairs {
        if !store.contains(&p.chunk_id) {
            return Err(RetrievalError::UnknownChunk(p.chunk_id.clone()));
        }
        relevant.entry(p.query_id.as_str()).or_default().insert(p.chunk_id.as_str());
    }
    train_pairs
        .par_iter()
        .map(|pair| {
            let rel = &relevant[pair.query_id.as_str()];
            let mut negatives: Vec<String> = Vec::with_capacity(cfg.n_neg);
            if cfg.k > 0 && cfg.n_neg > 0 {
                let ranked = retrieve(pair, cfg.k)?;
                for e in &ranked.entries {
                    if negatives.len() == cfg.n_neg {
                        break;
                    }
                    if !rel.contains(e.chunk_id.as_str()) && !negatives.contains(&e.chunk_id) {
                        negatives.push(e.chunk_id.clone());
                    }
                }
            }
            if negatives.len() < cfg.n_neg {
                let pool: Vec<&str> = store
                    .chunks()
                    .iter()
                    .map(|c| c.id.as_str())
                    .filter(|id| !rel.contains(id) && !negatives.iter().any(|n| n == id))
                    .collect();
                let need = cfg.n_neg - negatives.len();
                if pool.len() < need {
                    return Err(RetrievalError::NotEnoughNegatives {
                        query_id: pair.query_id.clone(),
                        available: pool.len() + negatives.len(),
                        n_neg: cfg.n_neg,
                    });
                }
                let mut rng = derive_rng(cfg.seed, &[b"mine", pair.query_id.as_bytes(), pair.chunk_id.as_bytes()]);
                negatives.extend(pool.choose_multiple(&mut rng, need).map(|s| s.to_string()));
            }
            Ok(TrainingRecord {
                query_id: pair.query_id.clone(),
                query: pair.question.clone(),
                positive_id: pair.chunk_id.clone(),
                negative_ids: negatives,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;
    use crate::retrieval::ScoredChunk;
    use proptest::prelude::*;

    fn store(n: usize) -> ChunkStore {
        ChunkStore::new(
            (0..n)
                .map(|i| Chunk {
                    id: format!("c{i}"),
                    doc_id: "d".into(),
                    seq: i,
                    text: format!("text {i}"),
                    token_count: 2,
                    overlap_prefix_tokens: 0,
                })
                .collect(),
        )
        .unwrap()
    }

    fn pair(q: &str, c: &str) -> QAPair {
        QAPair {
            query_id: q.into(),
            question: format!("{q}?"),
            chunk_id: c.into(),
            relevance: 1,
        }
    }

    fn fixed(order: &'static [&'static str]) -> impl Fn(&QAPair, usize) -> Result<RankedList, RetrievalError> + Sync {
        move |p: &QAPair, k: usize| {
            let entries = order
                .iter()
                .enumerate()
                .map(|(i, id)| ScoredChunk {
                    chunk_id: id.to_string(),
                    score: -(i as f64),
                })
                .collect();
            Ok(RankedList::from_scores(&p.query_id, entries, k, "fixed"))
        }
    }

    #[test]
    fn forced_by_small_corpus() {
        let cfg = MiningConfig { k: 3, n_neg: 2, seed: 1 };
        let out = mine_hard_negatives(&[pair("q", "c0")], &store(3), fixed(&["c0", "c1", "c2"]), &cfg).unwrap();
        assert_eq!(out[0].negative_ids, vec!["c1", "c2"]);
    }

    #[test]
    fn positive_absent_takes_top() {
        let cfg = MiningConfig { k: 3, n_neg: 2, seed: 1 };
        let out = mine_hard_negatives(&[pair("q", "c4")], &store(6), fixed(&["c2", "c0", "c1"]), &cfg).unwrap();
        assert_eq!(out[0].negative_ids, vec!["c2", "c0"]);
    }

    #[test]
    fn pads_deterministically() {
        let cfg = MiningConfig { k: 1, n_neg: 1, seed: 9 };
        let cfg3 = MiningConfig { k: 3, n_neg: 3, seed: 9 };
        let a = mine_hard_negatives(&[pair("q", "c0")], &store(10), fixed(&["c0"]), &cfg3).unwrap();
        let b = mine_hard_negatives(&[pair("q", "c0")], &store(10), fixed(&["c0"]), &cfg3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].negative_ids.len(), 3);
        assert!(!a[0].negative_ids.contains(&"c0".to_string()));
        assert!(mine_hard_negatives(&[pair("q", "c0")], &store(1), fixed(&["c0"]), &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn positives_never_negatives(n in 4usize..40, n_neg in 1usize..4, seed in 0u64..1000, order_seed in 0u64..1000) {
            let st = store(n);
            let pairs: Vec<QAPair> = (0..n).step_by(2).map(|i| pair(&format!("q{}", i / 4), &format!("c{i}"))).collect();
            let retrieve = |p: &QAPair, k: usize| {
                let mut ids: Vec<String> = st.chunks().iter().map(|c| c.id.clone()).collect();
                ids.shuffle(&mut derive_rng(order_seed, &[p.query_id.as_bytes()]));
                let entries = ids.into_iter().enumerate().map(|(i, chunk_id)| ScoredChunk { chunk_id, score: -(i as f64) }).collect();
                Ok(RankedList::from_scores(&p.query_id, entries, k, "fuzz"))
            };
            let cfg = MiningConfig { k: 5, n_neg, seed };
            match mine_hard_negatives(&pairs, &st, retrieve, &cfg) {
                Ok(records) => {
                    for r in &records {
                        let rel: Vec<&QAPair> = pairs.iter().filter(|p| p.query_id == r.query_id).collect();
                        prop_assert!(rel.iter().all(|p| !r.negative_ids.contains(&p.chunk_id)));
                        let uniq: HashSet<_> = r.negative_ids.iter().collect();
                        prop_assert_eq!(uniq.len(), r.negative_ids.len());
                        prop_assert_eq!(r.negative_ids.len(), n_neg);
                    }
                }
                Err(RetrievalError::NotEnoughNegatives { .. }) | Err(RetrievalError::CorpusTooSmall { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
