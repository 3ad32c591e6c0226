//! Model-role contracts: single-vector text embedders, per-token embedders and
//! query-passage pair scorers, with stub, oracle, file and HTTP providers.
//!
//! Vectors are stored as `f32`; every dot product is accumulated in `f64`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod file;
mod http;
mod oracle;
mod stub;

pub use file::{FileEmbedder, FilePairScorer, FileTokenEmbedder, VectorFile};
pub use http::{HttpEmbedder, HttpPairScorer, HttpTokenEmbedder};
pub use oracle::OracleEmbedder;
pub use stub::{StubEmbedder, StubPairScorer, StubTokenEmbedder};

pub type DenseVector = Vec<f32>;

/// Per-token vectors of one text; never empty, all rows share dims.
pub type MultiVector = Vec<Vec<f32>>;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimsMismatch { expected: usize, got: usize },
    #[error("no stored vector for text {0:?}")]
    MissingKey(String),
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("embedding protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Query,
    Passage,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Query => "query",
            Role::Passage => "passage",
        }
    }
}

pub trait TextEmbedder: Send + Sync {
    fn dims(&self) -> usize;

    /// Embeds a batch; output order matches input order.
    fn embed_batch(&self, texts: &[&str], role: Role) -> Result<Vec<DenseVector>, EmbedError>;

    fn embed(&self, text: &str, role: Role) -> Result<DenseVector, EmbedError> {
        let mut v = self.embed_batch(&[text], role)?;
        v.pop().ok_or_else(|| EmbedError::Protocol("empty embedding batch".into()))
    }
}

pub trait TokenEmbedder: Send + Sync {
    fn dims(&self) -> usize;

    fn embed_tokens_batch(&self, texts: &[&str], role: Role) -> Result<Vec<MultiVector>, EmbedError>;

    fn embed_tokens(&self, text: &str, role: Role) -> Result<MultiVector, EmbedError> {
        let mut v = self.embed_tokens_batch(&[text], role)?;
        v.pop().ok_or_else(|| EmbedError::Protocol("empty embedding batch".into()))
    }
}

/// Higher score means more relevant. Not required to be symmetric.
pub trait PairScorer: Send + Sync {
    fn score_batch(&self, query: &str, passages: &[&str]) -> Result<Vec<f64>, EmbedError>;

    fn score(&self, query: &str, passage: &str) -> Result<f64, EmbedError> {
        let mut v = self.score_batch(query, &[passage])?;
        v.pop().ok_or_else(|| EmbedError::Protocol("empty score batch".into()))
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub fn l2_norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales to unit length in place. Returns false (and leaves `v` alone) for a
/// zero vector.
pub fn normalize(v: &mut [f32]) -> bool {
    let n = l2_norm(v);
    if n == 0.0 {
        return false;
    }
    for x in v.iter_mut() {
        *x = (*x as f64 / n) as f32;
    }
    true
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

pub(crate) fn check_vector(v: &[f32], dims: usize) -> Result<(), EmbedError> {
    if v.len() != dims {
        return Err(EmbedError::DimsMismatch {
            expected: dims,
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbedError::Protocol("non-finite vector component".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_and_cosine() {
        let mut v = vec![3.0f32, 4.0];
        assert!(normalize(&mut v));
        assert!((l2_norm(&v) - 1.0).abs() < 1e-7);
        let mut z = vec![0.0f32; 3];
        assert!(!normalize(&mut z));
        assert_eq!(cosine(&z, &[1.0, 0.0, 0.0]), 0.0);
        assert!((cosine(&[1.0, 1.0], &[2.0, 2.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vector_checks() {
        assert!(check_vector(&[1.0, 2.0], 2).is_ok());
        assert!(matches!(check_vector(&[1.0], 2), Err(EmbedError::DimsMismatch { .. })));
        assert!(check_vector(&[f32::NAN, 0.0], 2).is_err());
    }
}
