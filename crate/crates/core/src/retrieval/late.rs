use std::collections::HashSet;
use std::path::Path;

use super::{RankedList, RetrievalError, ScoredChunk};
use crate::corpus::Chunk;
use crate::embed::{dot, normalize, EmbedError, MultiVector, Role, TokenEmbedder, VectorFile};

const EMBED_BATCH: usize = 128;

/// Sum over query tokens of the best dot product against any document token.
/// Inputs are used as given.
pub fn maxsim_score(q: &[Vec<f32>], d: &[Vec<f32>]) -> Result<f64, RetrievalError> {
    let dims = q.first().or(d.first()).map_or(0, Vec::len);
    if let Some(bad) = q.iter().chain(d).find(|v| v.len() != dims) {
        return Err(RetrievalError::DimsMismatch { expected: dims, got: bad.len() });
    }
    if d.is_empty() {
        return Ok(0.0);
    }
    Ok(q.iter()
        .map(|qi| d.iter().map(|dj| dot(qi, dj)).fold(f64::NEG_INFINITY, f64::max))
        .sum())
}

fn normalize_tokens(mv: &mut MultiVector) {
    for v in mv.iter_mut() {
        normalize(v);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LateInteractionIndex {
    chunk_ids: Vec<String>,
    docs: Vec<MultiVector>,
    dims: usize,
}

impl LateInteractionIndex {
    pub fn from_docs(docs: Vec<(String, MultiVector)>) -> Result<Self, RetrievalError> {
        let dims = docs
            .first()
            .and_then(|(_, mv)| mv.first())
            .map(Vec::len)
            .ok_or(RetrievalError::EmptyIndex)?;
        let mut seen = HashSet::new();
        let mut chunk_ids = Vec::with_capacity(docs.len());
        let mut out = Vec::with_capacity(docs.len());
        for (id, mut mv) in docs {
            if mv.is_empty() {
                return Err(EmbedError::Protocol(format!("empty multivector for {id}")).into());
            }
            if let Some(bad) = mv.iter().find(|v| v.len() != dims) {
                return Err(RetrievalError::DimsMismatch { expected: dims, got: bad.len() });
            }
            if !seen.insert(id.clone()) {
                return Err(RetrievalError::DuplicateChunk(id));
            }
            normalize_tokens(&mut mv);
            chunk_ids.push(id);
            out.push(mv);
        }
        Ok(LateInteractionIndex { chunk_ids, docs: out, dims })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.chunk_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunk_ids.is_empty()
    }

    pub fn chunk_ids(&self) -> &[String] {
        &self.chunk_ids
    }

    pub fn doc(&self, chunk_id: &str) -> Option<&MultiVector> {
        self.chunk_ids.iter().position(|c| c == chunk_id).map(|i| &self.docs[i])
    }

    pub fn docs(&self) -> impl Iterator<Item = (&str, &MultiVector)> {
        self.chunk_ids.iter().map(String::as_str).zip(&self.docs)
    }

    /// Exhaustive MaxSim scan with a normalized query multivector.
    pub fn search_multivector(
        &self,
        query_id: &str,
        q: &[Vec<f32>],
        k: usize,
        provenance: &str,
    ) -> Result<RankedList, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let mut scored = Vec::with_capacity(self.len());
        for (id, d) in self.docs() {
            scored.push(ScoredChunk {
                chunk_id: id.to_string(),
                score: maxsim_score(q, d)?,
            });
        }
        Ok(RankedList::from_scores(query_id, scored, k, provenance))
    }

    /// One flattened multivector record per chunk, keyed by chunk id.
    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let mut file = VectorFile::new(self.dims);
        for (id, mv) in self.docs() {
            file.insert(id, mv.concat())?;
        }
        Ok(file.save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let file = VectorFile::load(path)?;
        let dims = file.dims;
        let docs = file
            .iter()
            .map(|(k, flat)| (k.to_string(), flat.chunks_exact(dims).map(<[f32]>::to_vec).collect()))
            .collect();
        Self::from_docs(docs)
    }
}

pub fn build_late_index(chunks: &[Chunk], embedder: &dyn TokenEmbedder) -> Result<LateInteractionIndex, RetrievalError> {
    if chunks.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let mut docs = Vec::with_capacity(chunks.len());
    for batch in chunks.chunks(EMBED_BATCH) {
        let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
        let mvs = embedder.embed_tokens_batch(&texts, Role::Passage)?;
        if mvs.len() != batch.len() {
            return Err(EmbedError::Protocol(format!("{} texts embedded into {} multivectors", batch.len(), mvs.len())).into());
        }
        docs.extend(batch.iter().map(|c| c.id.clone()).zip(mvs));
    }
    LateInteractionIndex::from_docs(docs)
}

pub(crate) fn embed_query_tokens(embedder: &dyn TokenEmbedder, query: &str) -> Result<MultiVector, RetrievalError> {
    let mut q = embedder.embed_tokens(query, Role::Query)?;
    if q.is_empty() {
        return Err(EmbedError::Protocol("empty query multivector".into()).into());
    }
    normalize_tokens(&mut q);
    Ok(q)
}

pub fn late_interaction_search(
    index: &LateInteractionIndex,
    query_id: &str,
    query: &str,
    embedder: &dyn TokenEmbedder,
    k: usize,
    provenance: &str,
) -> Result<RankedList, RetrievalError> {
    let q = embed_query_tokens(embedder, query)?;
    index.search_multivector(query_id, &q, k, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::StubTokenEmbedder;
    use rand::{Rng, SeedableRng};

    fn unit(v: Vec<f32>) -> Vec<f32> {
        let mut v = v;
        normalize(&mut v);
        v
    }

    #[test]
    fn maxsim_basics() {
        let e = vec![vec![1.0f32, 0.0]];
        assert_eq!(maxsim_score(&e, &e).unwrap(), 1.0);
        assert_eq!(maxsim_score(&e, &[vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap(), 0.0);
        assert!(maxsim_score(&e, &[vec![1.0, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn maxsim_bounded_by_query_length() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut mv = |n: usize| -> Vec<Vec<f32>> {
                (0..n).map(|_| unit((0..8).map(|_| rng.gen_range(-1.0f32..1.0)).collect())).collect()
            };
            let q = mv(5);
            let d = mv(8);
            assert!(maxsim_score(&q, &d).unwrap().abs() <= 5.0 + 1e-9);
        }
    }

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            id: id.into(),
            doc_id: "d".into(),
            seq: 0,
            text: text.into(),
            token_count: 1,
            overlap_prefix_tokens: 0,
        }
    }

    #[test]
    fn own_text_ranks_first_on_50_docs() {
        let e = StubTokenEmbedder::new(7, 32).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
        let chunks: Vec<Chunk> = (0..50)
            .map(|i| {
                let words: Vec<String> = (0..rng.gen_range(4..16)).map(|_| format!("t{}", rng.gen_range(0..60))).collect();
                chunk(&format!("c{i:02}"), &words.join(" "))
            })
            .collect();
        let idx = build_late_index(&chunks, &e).unwrap();
        for c in &chunks {
            let r = late_interaction_search(&idx, "q", &c.text, &e, 1, "t").unwrap();
            assert_eq!(r.entries[0].chunk_id, c.id);
        }
    }

    #[test]
    fn single_doc_and_persistence() {
        let dir = tempfile::tempdir().unwrap();
        let e = StubTokenEmbedder::new(7, 8).unwrap();
        let idx = build_late_index(&[chunk("a", "hello there"), chunk("b", "general kenobi")], &e).unwrap();
        let p = dir.path().join("late.vec");
        idx.save(&p).unwrap();
        let back = LateInteractionIndex::load(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.doc("b").unwrap().len(), 2);
        let one = build_late_index(&[chunk("a", "x")], &e).unwrap();
        assert_eq!(late_interaction_search(&one, "q", "anything", &e, 3, "t").unwrap().chunk_ids(), vec!["a"]);
    }
}
