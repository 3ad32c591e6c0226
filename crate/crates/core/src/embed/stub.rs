//! Deterministic hash-seeded providers for offline runs and tests.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{dot, normalize, DenseVector, EmbedError, MultiVector, PairScorer, Role, TextEmbedder, TokenEmbedder};
use crate::corpus::tokenize;
use crate::seed::{derive_rng, derive_u64};

fn check_dims(dims: usize) -> Result<(), EmbedError> {
    if dims < 2 {
        return Err(EmbedError::InvalidConfig(format!("stub dims must be at least 2, got {dims}")));
    }
    Ok(())
}

/// Pseudo-random unit vector for one token.
fn token_vector(seed: u64, token: &str, dims: usize) -> Vec<f64> {
    let mut rng = derive_rng(seed, &[b"token-vector", token.as_bytes()]);
    let mut v: Vec<f64> = (0..dims).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn constant(dims: usize) -> Vec<f32> {
    vec![(1.0 / (dims as f64).sqrt()) as f32; dims]
}

fn to_unit_f32(v: &[f64]) -> Vec<f32> {
    let mut out: Vec<f32> = v.iter().map(|&x| x as f32).collect();
    normalize(&mut out);
    out
}

/// Bag-of-tokens embedder: the normalized sum of per-token unit vectors.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    seed: u64,
    dims: usize,
}

impl StubEmbedder {
    pub fn new(seed: u64, dims: usize) -> Result<Self, EmbedError> {
        check_dims(dims)?;
        Ok(StubEmbedder { seed, dims })
    }

    fn embed_text(&self, text: &str) -> DenseVector {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return constant(self.dims);
        }
        let mut acc = vec![0.0f64; self.dims];
        for t in &tokens {
            for (a, x) in acc.iter_mut().zip(token_vector(self.seed, t, self.dims)) {
                *a += x;
            }
        }
        if acc.iter().all(|&x| x == 0.0) {
            return constant(self.dims);
        }
        to_unit_f32(&acc)
    }
}

impl TextEmbedder for StubEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn embed_batch(&self, texts: &[&str], _role: Role) -> Result<Vec<DenseVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

/// Per-token embedder. Each token's vector mixes in its neighbours, so the
/// same word in a different context gets a slightly different vector.
#[derive(Debug, Clone)]
pub struct StubTokenEmbedder {
    seed: u64,
    dims: usize,
}

const CONTEXT_WEIGHT: f64 = 0.3;
const EDGE: &str = "\u{2}";

impl StubTokenEmbedder {
    pub fn new(seed: u64, dims: usize) -> Result<Self, EmbedError> {
        check_dims(dims)?;
        Ok(StubTokenEmbedder { seed, dims })
    }

    fn embed_text(&self, text: &str) -> MultiVector {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return vec![constant(self.dims)];
        }
        let base: Vec<Vec<f64>> = tokens.iter().map(|t| token_vector(self.seed, t, self.dims)).collect();
        let edge = token_vector(self.seed, EDGE, self.dims);
        (0..tokens.len())
            .map(|i| {
                let prev = if i == 0 { &edge } else { &base[i - 1] };
                let next = base.get(i + 1).unwrap_or(&edge);
                let mixed: Vec<f64> = (0..self.dims)
                    .map(|d| base[i][d] + CONTEXT_WEIGHT * (prev[d] + next[d]))
                    .collect();
                if mixed.iter().all(|&x| x == 0.0) {
                    constant(self.dims)
                } else {
                    to_unit_f32(&mixed)
                }
            })
            .collect()
    }
}

impl TokenEmbedder for StubTokenEmbedder {
    fn dims(&self) -> usize {
        self.dims
    }

    fn embed_tokens_batch(&self, texts: &[&str], _role: Role) -> Result<Vec<MultiVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

/// Cosine of stub embeddings plus an order-sensitive hash term below 1e-6
/// that keeps otherwise equal scores apart.
#[derive(Debug, Clone)]
pub struct StubPairScorer {
    seed: u64,
    embedder: StubEmbedder,
}

pub const STUB_SCORER_DIMS: usize = 64;
const NOISE_SCALE: f64 = 1e-7;

impl StubPairScorer {
    pub fn new(seed: u64) -> Self {
        StubPairScorer {
            seed,
            embedder: StubEmbedder::new(seed, STUB_SCORER_DIMS).expect("valid dims"),
        }
    }
}

impl PairScorer for StubPairScorer {
    fn score_batch(&self, query: &str, passages: &[&str]) -> Result<Vec<f64>, EmbedError> {
        let q = self.embedder.embed_text(query);
        Ok(passages
            .iter()
            .map(|p| {
                let d = self.embedder.embed_text(p);
                let h = derive_u64(self.seed, &[b"pair-noise", query.as_bytes(), p.as_bytes()]);
                let noise = (h >> 11) as f64 / (1u64 << 53) as f64 * NOISE_SCALE;
                dot(&q, &d) + noise
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{cosine, l2_norm};

    #[test]
    fn deterministic_unit_vectors() {
        let e = StubEmbedder::new(7, 64).unwrap();
        let a = e.embed("Finacle helps banks", Role::Query).unwrap();
        let b = e.embed("Finacle helps banks", Role::Passage).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert!((l2_norm(&a) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shared_token_means_closer() {
        let e = StubEmbedder::new(7, 64).unwrap();
        let v = |t: &str| e.embed(t, Role::Query).unwrap();
        let near = cosine(&v("alpha beta"), &v("alpha gamma"));
        let far = cosine(&v("alpha beta"), &v("delta epsilon"));
        assert!(near > far);
        assert!((near - 0.471_248).abs() < 1e-5, "{near}");
    }

    #[test]
    fn empty_text_is_constant() {
        let e = StubEmbedder::new(7, 16).unwrap();
        let a = e.embed("", Role::Query).unwrap();
        assert_eq!(a, e.embed("   \n", Role::Passage).unwrap());
        assert!(a.iter().all(|&x| x == a[0]));
        let t = StubTokenEmbedder::new(7, 16).unwrap();
        assert_eq!(t.embed_tokens("", Role::Query).unwrap().len(), 1);
    }

    #[test]
    fn rejects_tiny_dims() {
        assert!(StubEmbedder::new(1, 1).is_err());
        assert!(StubTokenEmbedder::new(1, 0).is_err());
    }

    #[test]
    fn token_vectors_are_unit_and_contextual() {
        let t = StubTokenEmbedder::new(7, 32).unwrap();
        let a = t.embed_tokens("red apple pie", Role::Query).unwrap();
        let b = t.embed_tokens("green apple tart", Role::Query).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|v| (l2_norm(v) - 1.0).abs() < 1e-6));
        let c = cosine(&a[1], &b[1]);
        assert!(c < 1.0 - 1e-6 && c > 0.5, "{c}");
    }

    #[test]
    fn pair_scorer_regression_and_asymmetry() {
        let s = StubPairScorer::new(7);
        let x = s.score("what does finacle do", "Finacle helps banks engage customers").unwrap();
        assert_eq!(x, s.score("what does finacle do", "Finacle helps banks engage customers").unwrap());
        assert!((x - 0.284_819).abs() < 1e-5, "{x}");
        let y = s.score("Finacle helps banks engage customers", "what does finacle do").unwrap();
        assert!((x - y).abs() < 1e-6);
        assert_ne!(x, y);
    }
}
