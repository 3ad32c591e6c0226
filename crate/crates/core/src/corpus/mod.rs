//! Corpus preparation: extraction, cleaning, PII masking, tokenization,
//! record denormalization and token-budgeted chunking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod chunk;
mod clean;
mod extract;
mod histogram;
mod mask;
mod records;
pub mod tokenize;

pub use chunk::{chunk_text, chunk_text_with, split_paragraphs};
pub use clean::clean_text;
pub use extract::{extract_document, extract_text};
pub use histogram::{chunk_histogram, write_histogram_tsv};
pub use mask::{mask_pii, MaskSpan, PiiMasker, Recognizer};
pub use records::denormalize_records;
pub use tokenize::{detokenize, tokenize, Token, Tokenizer, WordPunctTokenizer};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid chunker config: {0}")]
    InvalidConfig(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("key fields need {needed} tokens but the budget is {max_tokens}")]
    UnsplittableContext { needed: usize, max_tokens: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    PlainText,
    Html,
    Markdown,
    StructuredRecords,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::PlainText => "plain_text",
            Source::Html => "html",
            Source::Markdown => "markdown",
            Source::StructuredRecords => "structured_records",
        }
    }
}

/// Key/value record flattened into `key: value` lines before chunking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredRecord {
    pub fields: Vec<(String, String)>,
    #[serde(default)]
    pub key_fields: Vec<String>,
}

impl StructuredRecord {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.fields.is_empty() {
            return Err(CorpusError::InvalidRecord("record has no fields".into()));
        }
        if let Some((k, _)) = self.fields.iter().find(|(k, _)| k.trim().is_empty()) {
            return Err(CorpusError::InvalidRecord(format!("empty key {k:?}")));
        }
        for key in &self.key_fields {
            if !self.fields.iter().any(|(k, _)| k == key) {
                return Err(CorpusError::InvalidRecord(format!(
                    "key field {key:?} is not a field of the record"
                )));
            }
        }
        Ok(())
    }

    pub fn render_line(key: &str, value: &str) -> String {
        format!("{key}: {value}")
    }

    pub fn render(&self) -> String {
        self.fields
            .iter()
            .map(|(k, v)| Self::render_line(k, v))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// One corpus document. Structured documents carry their record and a
/// rendered `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub source: Source,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_fields: Option<Vec<String>>,
}

impl Document {
    pub fn new(id: impl Into<String>, source: Source, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            source,
            text: text.into(),
            metadata: BTreeMap::new(),
            fields: None,
            key_fields: None,
        }
    }

    pub fn record(&self) -> Option<StructuredRecord> {
        self.fields.as_ref().map(|fields| StructuredRecord {
            fields: fields.clone(),
            key_fields: self.key_fields.clone().unwrap_or_default(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub doc_id: String,
    pub seq: usize,
    pub text: String,
    pub token_count: usize,
    pub overlap_prefix_tokens: usize,
}

impl Chunk {
    pub fn make_id(doc_id: &str, seq: usize) -> String {
        format!("{doc_id}#{seq}")
    }
}

pub const DEFAULT_DELIMITERS: [&str; 5] = ["\n\n", "\n", ". ", " ", ""];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkerConfig {
    pub max_tokens: usize,
    pub overlap_tokens: usize,
    pub delimiters: Vec<String>,
}

impl Default for ChunkerConfig {
    fn default() -> Self {
        ChunkerConfig {
            max_tokens: 512,
            overlap_tokens: 50,
            delimiters: DEFAULT_DELIMITERS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ChunkerConfig {
    pub fn new(max_tokens: usize, overlap_tokens: usize) -> Self {
        ChunkerConfig {
            max_tokens,
            overlap_tokens,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.max_tokens == 0 {
            return Err(CorpusError::InvalidConfig("max_tokens must be positive".into()));
        }
        if self.overlap_tokens == 0 {
            return Err(CorpusError::InvalidConfig("overlap_tokens must be positive".into()));
        }
        if self.overlap_tokens >= self.max_tokens {
            return Err(CorpusError::InvalidConfig(format!(
                "overlap_tokens ({}) must be below max_tokens ({})",
                self.overlap_tokens, self.max_tokens
            )));
        }
        match self.delimiters.last() {
            Some(last) if last.is_empty() => {}
            _ => {
                return Err(CorpusError::InvalidConfig(
                    "delimiters must end with the empty-string fallback".into(),
                ))
            }
        }
        if !(40..=70).contains(&self.overlap_tokens) {
            tracing::warn!(
                overlap = self.overlap_tokens,
                "overlap_tokens outside the usual 40-70 range"
            );
        }
        Ok(())
    }
}
