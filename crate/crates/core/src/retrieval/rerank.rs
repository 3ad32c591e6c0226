use super::late::embed_query_tokens;
use super::{maxsim_score, ChunkStore, LateInteractionIndex, RankedList, RetrievalError, ScoredChunk};
use crate::embed::{normalize, EmbedError, PairScorer, Role, TokenEmbedder};

pub enum Reranker<'a> {
    Pair(&'a dyn PairScorer),
    /// MaxSim with the given token embedder. When an index built by the same
    /// embedder is supplied, stored document vectors are reused.
    LateInteraction {
        embedder: &'a dyn TokenEmbedder,
        index: Option<&'a LateInteractionIndex>,
    },
}

/// Rescores exactly the candidate set and re-sorts it. No fusion with the
/// retriever's scores.
pub fn rerank(
    candidates: &RankedList,
    query: &str,
    store: &ChunkStore,
    reranker: &Reranker<'_>,
    stage: &str,
) -> Result<RankedList, RetrievalError> {
    let ids = candidates.chunk_ids();
    let scores: Vec<f64> = match reranker {
        Reranker::Pair(scorer) => {
            let texts = ids.iter().map(|id| store.text(id)).collect::<Result<Vec<_>, _>>()?;
            let scores = scorer.score_batch(query, &texts)?;
            if scores.len() != texts.len() {
                return Err(EmbedError::Protocol(format!("{} passages scored as {}", texts.len(), scores.len())).into());
            }
            scores
        }
        Reranker::LateInteraction { embedder, index } => {
            let q = embed_query_tokens(*embedder, query)?;
            let mut out = Vec::with_capacity(ids.len());
            for id in &ids {
                let stored = index.and_then(|idx| idx.doc(id));
                let score = match stored {
                    Some(d) => maxsim_score(&q, d)?,
                    None => {
                        let mut d = embedder.embed_tokens(store.text(id)?, Role::Passage)?;
                        d.iter_mut().for_each(|v| {
                            normalize(v);
                        });
                        maxsim_score(&q, &d)?
                    }
                };
                out.push(score);
            }
            out
        }
    };
    let entries: Vec<ScoredChunk> = ids
        .iter()
        .zip(scores)
        .map(|(id, score)| ScoredChunk {
            chunk_id: id.to_string(),
            score,
        })
        .collect();
    let n = entries.len();
    let provenance = format!("{}>{stage}", candidates.provenance);
    Ok(RankedList::from_scores(&candidates.query_id, entries, n, &provenance))
}
