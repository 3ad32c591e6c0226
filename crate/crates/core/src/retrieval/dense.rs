use std::path::Path;

use super::{RankedList, RetrievalError, ScoredChunk};
use crate::corpus::Chunk;
use crate::embed::{dot, l2_norm, normalize, EmbedError, Role, TextEmbedder, VectorFile};

const EMBED_BATCH: usize = 256;

/// Unit-normalized chunk vectors, row `i` belonging to `chunk_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    chunk_ids: Vec<String>,
    vectors: Vec<f32>,
    dims: usize,
}

impl DenseIndex {
    /// Normalizes each row; zero rows are kept as-is.
    pub fn from_rows(rows: Vec<(String, Vec<f32>)>) -> Result<Self, RetrievalError> {
        Self::assemble(rows, true)
    }

    fn assemble(rows: Vec<(String, Vec<f32>)>, renormalize: bool) -> Result<Self, RetrievalError> {
        let dims = rows.first().map(|(_, v)| v.len()).ok_or(RetrievalError::EmptyIndex)?;
        let mut seen = std::collections::HashSet::new();
        let mut chunk_ids = Vec::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len() * dims);
        let mut zero = 0usize;
        for (id, mut v) in rows {
            if v.len() != dims {
                return Err(RetrievalError::DimsMismatch { expected: dims, got: v.len() });
            }
            if !seen.insert(id.clone()) {
                return Err(RetrievalError::DuplicateChunk(id));
            }
            if renormalize {
                if !normalize(&mut v) {
                    zero += 1;
                }
            } else {
                let n = l2_norm(&v);
                if n == 0.0 {
                    zero += 1;
                } else if (n - 1.0).abs() > 1e-6 {
                    normalize(&mut v);
                }
            }
            chunk_ids.push(id);
            vectors.extend(v);
        }
        if zero > 0 {
            tracing::warn!(zero, "zero vectors stored in dense index; they cannot win a cosine comparison");
        }
        Ok(DenseIndex { chunk_ids, vectors, dims })
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

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dims..(i + 1) * self.dims]
    }

    /// Exact top-k by dot product with an already normalized query vector.
    pub fn search_vector(&self, query_id: &str, q: &[f32], k: usize, provenance: &str) -> Result<RankedList, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        if q.len() != self.dims {
            return Err(RetrievalError::DimsMismatch { expected: self.dims, got: q.len() });
        }
        let scored = self
            .chunk_ids
            .iter()
            .enumerate()
            .map(|(i, id)| ScoredChunk {
                chunk_id: id.clone(),
                score: dot(q, self.row(i)),
            })
            .collect();
        Ok(RankedList::from_scores(query_id, scored, k, provenance))
    }

    /// Stores the index as a vector file keyed by chunk id, in index order.
    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let mut file = VectorFile::new(self.dims);
        for (i, id) in self.chunk_ids.iter().enumerate() {
            file.insert(id.clone(), self.row(i).to_vec())?;
        }
        Ok(file.save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let file = VectorFile::load(path)?;
        let rows = file.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect();
        // stored rows are already unit length; renormalizing would perturb bits
        Self::assemble(rows, false)
    }
}

/// Embeds every chunk as a passage, in input order.
pub fn build_dense_index(chunks: &[Chunk], embedder: &dyn TextEmbedder) -> Result<DenseIndex, RetrievalError> {
    if chunks.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let mut rows = Vec::with_capacity(chunks.len());
    for batch in chunks.chunks(EMBED_BATCH) {
        let texts: Vec<&str> = batch.iter().map(|c| c.text.as_str()).collect();
        let vectors = embedder.embed_batch(&texts, Role::Passage)?;
        if vectors.len() != batch.len() {
            return Err(EmbedError::Protocol(format!("{} texts embedded into {} vectors", batch.len(), vectors.len())).into());
        }
        rows.extend(batch.iter().map(|c| c.id.clone()).zip(vectors));
    }
    DenseIndex::from_rows(rows)
}

pub fn dense_search(
    index: &DenseIndex,
    query_id: &str,
    query: &str,
    embedder: &dyn TextEmbedder,
    k: usize,
    provenance: &str,
) -> Result<RankedList, RetrievalError> {
    let mut q = embedder.embed(query, Role::Query)?;
    normalize(&mut q);
    index.search_vector(query_id, &q, k, provenance)
}
