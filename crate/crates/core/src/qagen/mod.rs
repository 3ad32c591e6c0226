//! Synthetic question generation: prompt rendering, generation clients,
//! response parsing, curation, train/validation splits and benchmark I/O.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod benchmark;
mod curate;
mod generate;
mod prompt;
mod split;

pub use benchmark::{
    build_pairs, load_benchmark, load_qrels_tsv, load_queries, write_qrels_tsv, Benchmark, Query,
};
pub use curate::{curate, CurationRules, STOPWORDS};
pub use generate::{
    generate, parse_questions, GenerationOutput, GenerationParams, GenerationRequest, HttpGenerator,
    StubGenerator, TextGenerator,
};
pub use prompt::{render_prompt, PromptTemplate};
pub use split::{split_dataset, train_count, SplitConfig};

#[derive(Debug, Error)]
pub enum QagenError {
    #[error("template {name}: {reason}")]
    Template { name: String, reason: String },
    #[error("template {0} requires an entity but none was given")]
    MissingEntity(String),
    #[error("template {0} takes no entity but one was given")]
    UnexpectedEntity(String),
    #[error("generation transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("generation protocol error: {0}")]
    Protocol(String),
    #[error("chunk {chunk_id} has no {key:?} metadata for stratification")]
    MissingStratum { chunk_id: String, key: String },
    #[error("invalid split config: {0}")]
    InvalidSplit(String),
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate judgment for ({query_id}, {chunk_id})")]
    DuplicateJudgment {
        path: String,
        line: usize,
        query_id: String,
        chunk_id: String,
    },
    #[error("qrels reference unknown chunks: {0:?}")]
    DanglingChunks(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Factual,
    Clarification,
    Interpretation,
    Scenario,
    Consequence,
    Extractive,
    Subjective,
    Reasoning,
    Unknown,
}

impl QuestionType {
    pub const LABELED: [QuestionType; 8] = [
        QuestionType::Factual,
        QuestionType::Clarification,
        QuestionType::Interpretation,
        QuestionType::Scenario,
        QuestionType::Consequence,
        QuestionType::Extractive,
        QuestionType::Subjective,
        QuestionType::Reasoning,
    ];

    /// Maps a generator label such as "Scenario based" or "Reasoning-based".
    pub fn from_label(label: &str) -> Option<QuestionType> {
        let norm: String = label
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .collect();
        let stem = norm
            .strip_suffix("based")
            .or_else(|| norm.strip_suffix("related"))
            .unwrap_or(&norm);
        Some(match stem {
            "factual" => QuestionType::Factual,
            "clarification" => QuestionType::Clarification,
            "interpretation" => QuestionType::Interpretation,
            "scenario" => QuestionType::Scenario,
            "consequence" => QuestionType::Consequence,
            "extractive" => QuestionType::Extractive,
            "subjective" => QuestionType::Subjective,
            "reasoning" => QuestionType::Reasoning,
            _ => return None,
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            QuestionType::Factual => "Factual",
            QuestionType::Clarification => "Clarification",
            QuestionType::Interpretation => "Interpretation",
            QuestionType::Scenario => "Scenario based",
            QuestionType::Consequence => "Consequence related",
            QuestionType::Extractive => "Extractive",
            QuestionType::Subjective => "Subjective",
            QuestionType::Reasoning => "Reasoning based",
            QuestionType::Unknown => "Unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateQuestion {
    pub chunk_id: String,
    pub question: String,
    pub q_type: QuestionType,
    pub iteration: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub query_id: String,
    pub question: String,
    pub chunk_id: String,
    pub relevance: u32,
}
