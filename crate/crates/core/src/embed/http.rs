//! JSON-over-HTTP providers.
//!
//! - `POST /embed` `{texts, role, model}` -> `{vectors}`
//! - `POST /embed_tokens` `{texts, role, model}` -> `{multivectors}`
//! - `POST /score` `{query, passages, model}` -> `{scores}`

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{check_vector, DenseVector, EmbedError, MultiVector, PairScorer, Role, TextEmbedder, TokenEmbedder};
use crate::http::{join_url, HttpFailure, HttpSettings, JsonClient};

impl From<HttpFailure> for EmbedError {
    fn from(f: HttpFailure) -> Self {
        match f {
            HttpFailure::Transport { attempts, message } => EmbedError::Transport { attempts, message },
            HttpFailure::Protocol(m) => EmbedError::Protocol(m),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: Vec<String>,
    role: &'a str,
    model: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

#[derive(Deserialize)]
struct TokenResponse {
    multivectors: Vec<Vec<Vec<f32>>>,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    query: &'a str,
    passages: &'a [&'a str],
    model: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

/// Shared batching, prefixing and dims pinning.
struct Endpoint {
    url: String,
    model_hint: String,
    batch_size: usize,
    client: JsonClient,
    dims: OnceLock<usize>,
}

impl Endpoint {
    fn new(
        base_url: &str,
        path: &str,
        model_hint: &str,
        batch_size: usize,
        expected_dims: Option<usize>,
        settings: HttpSettings,
    ) -> Result<Self, EmbedError> {
        if batch_size == 0 {
            return Err(EmbedError::InvalidConfig("batch_size must be positive".into()));
        }
        let dims = OnceLock::new();
        if let Some(d) = expected_dims {
            dims.set(d).expect("fresh cell");
        }
        Ok(Endpoint {
            url: join_url(base_url, path),
            model_hint: model_hint.to_string(),
            batch_size,
            client: JsonClient::new(settings),
            dims,
        })
    }

    /// e5-family models expect an explicit role prefix.
    fn prepare(&self, text: &str, role: Role) -> String {
        if self.model_hint.starts_with("e5") {
            format!("{}: {text}", role.as_str())
        } else {
            text.to_string()
        }
    }

    fn pin(&self, v: &[f32]) -> Result<(), EmbedError> {
        let dims = *self.dims.get_or_init(|| v.len());
        check_vector(v, dims).map_err(|e| match e {
            EmbedError::DimsMismatch { expected, got } => {
                EmbedError::Protocol(format!("dims drifted from {expected} to {got}"))
            }
            other => other,
        })
    }

    fn dims(&self) -> usize {
        self.dims.get().copied().unwrap_or(0)
    }

    fn post_batches<R, T>(
        &self,
        texts: &[&str],
        role: Role,
        unpack: impl Fn(R) -> Vec<T>,
    ) -> Result<Vec<T>, EmbedError>
    where
        R: serde::de::DeserializeOwned,
    {
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(self.batch_size) {
            let req = EmbedRequest {
                texts: batch.iter().map(|t| self.prepare(t, role)).collect(),
                role: role.as_str(),
                model: &self.model_hint,
            };
            let items = unpack(self.client.post::<_, R>(&self.url, &req)?);
            if items.len() != batch.len() {
                return Err(EmbedError::Protocol(format!(
                    "sent {} texts, received {} results",
                    batch.len(),
                    items.len()
                )));
            }
            out.extend(items);
        }
        Ok(out)
    }
}

pub struct HttpEmbedder {
    endpoint: Endpoint,
}

impl HttpEmbedder {
    pub fn new(
        base_url: &str,
        model_hint: &str,
        batch_size: usize,
        expected_dims: Option<usize>,
        settings: HttpSettings,
    ) -> Result<Self, EmbedError> {
        Ok(HttpEmbedder {
            endpoint: Endpoint::new(base_url, "/embed", model_hint, batch_size, expected_dims, settings)?,
        })
    }
}

impl TextEmbedder for HttpEmbedder {
    /// Zero until the first response (or an expected value) pins it.
    fn dims(&self) -> usize {
        self.endpoint.dims()
    }

    fn embed_batch(&self, texts: &[&str], role: Role) -> Result<Vec<DenseVector>, EmbedError> {
        let vectors = self
            .endpoint
            .post_batches(texts, role, |r: EmbedResponse| r.vectors)?;
        for v in &vectors {
            self.endpoint.pin(v)?;
        }
        Ok(vectors)
    }
}

pub struct HttpTokenEmbedder {
    endpoint: Endpoint,
}

impl HttpTokenEmbedder {
    pub fn new(
        base_url: &str,
        model_hint: &str,
        batch_size: usize,
        expected_dims: Option<usize>,
        settings: HttpSettings,
    ) -> Result<Self, EmbedError> {
        Ok(HttpTokenEmbedder {
            endpoint: Endpoint::new(base_url, "/embed_tokens", model_hint, batch_size, expected_dims, settings)?,
        })
    }
}

impl TokenEmbedder for HttpTokenEmbedder {
    fn dims(&self) -> usize {
        self.endpoint.dims()
    }

    fn embed_tokens_batch(&self, texts: &[&str], role: Role) -> Result<Vec<MultiVector>, EmbedError> {
        let mvs = self
            .endpoint
            .post_batches(texts, role, |r: TokenResponse| r.multivectors)?;
        for mv in &mvs {
            if mv.is_empty() {
                return Err(EmbedError::Protocol("empty multivector".into()));
            }
            for v in mv {
                self.endpoint.pin(v)?;
            }
        }
        Ok(mvs)
    }
}

pub struct HttpPairScorer {
    url: String,
    model_hint: String,
    client: JsonClient,
}

impl HttpPairScorer {
    pub fn new(base_url: &str, model_hint: &str, settings: HttpSettings) -> Self {
        HttpPairScorer {
            url: join_url(base_url, "/score"),
            model_hint: model_hint.to_string(),
            client: JsonClient::new(settings),
        }
    }
}

impl PairScorer for HttpPairScorer {
    fn score_batch(&self, query: &str, passages: &[&str]) -> Result<Vec<f64>, EmbedError> {
        let req = ScoreRequest {
            query,
            passages,
            model: &self.model_hint,
        };
        let resp: ScoreResponse = self.client.post(&self.url, &req)?;
        if resp.scores.len() != passages.len() {
            return Err(EmbedError::Protocol(format!(
                "sent {} passages, received {} scores",
                passages.len(),
                resp.scores.len()
            )));
        }
        if resp.scores.iter().any(|s| !s.is_finite()) {
            return Err(EmbedError::Protocol("non-finite score".into()));
        }
        Ok(resp.scores)
    }
}
