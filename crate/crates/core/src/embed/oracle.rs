//! One-hot embedder that makes every paired chunk the unique nearest
//! neighbour of its question. Used to check the evaluation plumbing end to end.

use std::collections::HashMap;

use super::{DenseVector, EmbedError, Role, TextEmbedder};
use crate::corpus::Chunk;
use crate::qagen::QAPair;

#[derive(Debug, Clone)]
pub struct OracleEmbedder {
    dims: usize,
    slots: HashMap<String, usize>,
}

impl OracleEmbedder {
    /// Every chunk gets its own axis; each question maps to the axis of its
    /// paired chunk. Anything else embeds to the zero vector.
    pub fn new(pairs: &[QAPair], chunks: &[Chunk], dims: usize) -> Result<Self, EmbedError> {
        if dims < chunks.len() {
            return Err(EmbedError::InvalidConfig(format!(
                "oracle needs dims >= {} distinct chunks, got {dims}",
                chunks.len()
            )));
        }
        let mut slots: HashMap<String, usize> = HashMap::new();
        let mut by_id: HashMap<&str, usize> = HashMap::new();
        for (i, c) in chunks.iter().enumerate() {
            if by_id.insert(c.id.as_str(), i).is_some() {
                return Err(EmbedError::InvalidConfig(format!("duplicate chunk id {}", c.id)));
            }
            if slots.insert(c.text.clone(), i).is_some() {
                return Err(EmbedError::InvalidConfig(format!(
                    "chunk {} repeats the text of another chunk",
                    c.id
                )));
            }
        }
        for p in pairs {
            let slot = *by_id
                .get(p.chunk_id.as_str())
                .ok_or_else(|| EmbedError::InvalidConfig(format!("pair {} references unknown chunk {}", p.query_id, p.chunk_id)))?;
            match slots.insert(p.question.clone(), slot) {
                Some(prev) if prev != slot => {
                    return Err(EmbedError::InvalidConfig(format!(
                        "question of pair {} collides with another text",
                        p.query_id
                    )))
                }
                _ => {}
            }
        }
        Ok(OracleEmbedder { dims, slots })
    }
}

impl TextEmbedder for OracleEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn embed_batch(&self, texts: &[&str], _role: Role) -> Result<Vec<DenseVector>, EmbedError> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut v = vec![0.0f32; self.dims];
                if let Some(&slot) = self.slots.get(*t) {
                    v[slot] = 1.0;
                }
                v
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::cosine;

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

    fn fixture() -> (Vec<QAPair>, Vec<Chunk>) {
        let chunks: Vec<Chunk> = (0..6).map(|i| chunk(&format!("c{i}"), &format!("text {i}"))).collect();
        let pairs = (0..6)
            .map(|i| QAPair {
                query_id: format!("q{i}"),
                question: format!("question {i}?"),
                chunk_id: format!("c{i}"),
                relevance: 1,
            })
            .collect();
        (pairs, chunks)
    }

    #[test]
    fn question_matches_only_its_chunk() {
        let (pairs, chunks) = fixture();
        let o = OracleEmbedder::new(&pairs, &chunks, 8).unwrap();
        let q3 = o.embed("question 3?", Role::Query).unwrap();
        assert_eq!(cosine(&q3, &o.embed("text 3", Role::Passage).unwrap()), 1.0);
        assert_eq!(cosine(&q3, &o.embed("text 5", Role::Passage).unwrap()), 0.0);
        assert!(o.embed("unrelated", Role::Query).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn errors() {
        let (pairs, mut chunks) = fixture();
        assert!(OracleEmbedder::new(&pairs, &chunks, 5).is_err());
        chunks[1].text = chunks[0].text.clone();
        assert!(OracleEmbedder::new(&pairs, &chunks, 8).is_err());
    }
}
