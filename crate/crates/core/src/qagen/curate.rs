//! Mechanical quality filters for generated questions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::CandidateQuestion;
use crate::corpus::{tokenize, Chunk};

/// English function words ignored when checking topical overlap.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "might", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on",
    "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same",
    "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

/// Each rule can be switched off independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationRules {
    pub require_question_mark: bool,
    pub check_length: bool,
    pub min_words: usize,
    pub max_words: usize,
    pub require_content_overlap: bool,
    pub dedupe: bool,
}

impl Default for CurationRules {
    fn default() -> Self {
        CurationRules {
            require_question_mark: true,
            check_length: true,
            min_words: 4,
            max_words: 60,
            require_content_overlap: true,
            dedupe: true,
        }
    }
}

fn content_tokens(text: &str) -> HashSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().any(char::is_alphanumeric) && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Keeps candidates that pass every enabled rule, in input order.
pub fn curate(candidates: &[CandidateQuestion], chunk: &Chunk, rules: &CurationRules) -> Vec<CandidateQuestion> {
    let chunk_vocab = if rules.require_content_overlap {
        content_tokens(&chunk.text)
    } else {
        HashSet::new()
    };
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut kept = Vec::new();
    for c in candidates {
        let q = c.question.trim();
        if rules.require_question_mark && !q.ends_with('?') {
            continue;
        }
        if rules.check_length {
            let words = q.split_whitespace().count();
            if words < rules.min_words || words > rules.max_words {
                continue;
            }
        }
        if rules.require_content_overlap && content_tokens(q).is_disjoint(&chunk_vocab) {
            continue;
        }
        if rules.dedupe && !seen.insert((c.chunk_id.clone(), q.to_lowercase())) {
            continue;
        }
        kept.push(c.clone());
    }
    kept
}
