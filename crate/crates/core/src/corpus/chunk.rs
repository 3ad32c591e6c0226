//! Recursive delimiter-driven chunking with token budgets and overlap.
//!
//! Splitting happens in token space: a delimiter marks a cut point between two
//! adjacent tokens when it occurs in the text running from the start of the
//! left token up to the start of the right one, and reaches into the gap
//! between them. The empty delimiter matches every boundary, which is the
//! character-level fallback. Because every cut falls between tokens, chunk
//! texts are exact source slices and re-tokenize to the same tokens.

use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

use super::tokenize::{Token, Tokenizer, WordPunctTokenizer};
use super::{Chunk, ChunkerConfig, CorpusError};

pub fn chunk_text(doc_id: &str, text: &str, cfg: &ChunkerConfig) -> Result<Vec<Chunk>, CorpusError> {
    chunk_text_with(doc_id, text, cfg, &WordPunctTokenizer)
}

pub fn chunk_text_with(
    doc_id: &str,
    text: &str,
    cfg: &ChunkerConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<Chunk>, CorpusError> {
    cfg.validate()?;
    let tokens = tokenizer.tokenize_spans(text);
    if tokens.is_empty() {
        return Ok(Vec::new());
    }

    let ranges = if tokens.len() <= cfg.max_tokens {
        vec![0..tokens.len()]
    } else {
        let piece_budget = cfg.max_tokens - cfg.overlap_tokens;
        let splitter = Splitter::new(text, &tokens, &cfg.delimiters, piece_budget);
        let mut pieces = Vec::new();
        splitter.split(0..tokens.len(), 0, &mut pieces);
        merge_pieces(&pieces, cfg)
    };

    let mut chunks: Vec<Chunk> = Vec::with_capacity(ranges.len());
    for (seq, range) in ranges.into_iter().enumerate() {
        let prefix = match chunks.last() {
            Some(prev) => cfg.overlap_tokens.min(prev.token_count),
            None => 0,
        };
        let first = range.start - prefix;
        let slice = &text[tokens[first].span.start..tokens[range.end - 1].span.end];
        chunks.push(Chunk {
            id: Chunk::make_id(doc_id, seq),
            doc_id: doc_id.to_string(),
            seq,
            text: slice.to_string(),
            token_count: tokenizer.count(slice),
            overlap_prefix_tokens: prefix,
        });
    }
    Ok(chunks)
}

struct Splitter<'a> {
    text: &'a str,
    tokens: &'a [Token],
    delimiters: &'a [String],
    budget: usize,
}

impl<'a> Splitter<'a> {
    fn new(text: &'a str, tokens: &'a [Token], delimiters: &'a [String], budget: usize) -> Self {
        Splitter {
            text,
            tokens,
            delimiters,
            budget,
        }
    }

    /// Whether `delim` cuts between token `i` and token `i + 1`.
    fn cuts_after(&self, delim: &str, i: usize) -> bool {
        if delim.is_empty() {
            return true;
        }
        let left = &self.tokens[i].span;
        let window = &self.text[left.start..self.tokens[i + 1].span.start];
        let gap_offset = left.end - left.start;
        window
            .char_indices()
            .any(|(p, _)| p + delim.len() > gap_offset && window[p..].starts_with(delim))
    }

    fn split(&self, range: Range<usize>, level: usize, out: &mut Vec<Range<usize>>) {
        if range.len() <= self.budget {
            out.push(range);
            return;
        }
        // the empty-string fallback is last, so this only guards misuse
        let Some(delim) = self.delimiters.get(level) else {
            out.extend(range.map(|i| i..i + 1));
            return;
        };
        let cuts: Vec<usize> = (range.start..range.end - 1)
            .filter(|&i| self.cuts_after(delim, i))
            .collect();
        if cuts.is_empty() {
            self.split(range, level + 1, out);
            return;
        }
        let mut start = range.start;
        for cut in cuts.into_iter().chain(std::iter::once(range.end - 1)) {
            let sub = start..cut + 1;
            start = cut + 1;
            if sub.len() <= self.budget {
                out.push(sub);
            } else {
                self.split(sub, level + 1, out);
            }
        }
    }
}

/// Greedily merges adjacent pieces. The first chunk may use the whole budget;
/// later ones leave room for the overlap prefix.
fn merge_pieces(pieces: &[Range<usize>], cfg: &ChunkerConfig) -> Vec<Range<usize>> {
    let mut merged: Vec<Range<usize>> = Vec::new();
    let mut current: Option<Range<usize>> = None;
    for piece in pieces {
        let budget = if merged.is_empty() {
            cfg.max_tokens
        } else {
            cfg.max_tokens - cfg.overlap_tokens
        };
        current = match current {
            Some(cur) if cur.len() + piece.len() <= budget => Some(cur.start..piece.end),
            Some(cur) => {
                merged.push(cur);
                Some(piece.clone())
            }
            None => Some(piece.clone()),
        };
    }
    merged.extend(current);
    merged
}

fn blank_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\n[^\S\n]*\n").expect("blank line regex"))
}

/// Splits cleaned text into paragraphs at blank lines.
pub fn split_paragraphs(text: &str) -> Vec<String> {
    blank_line_re()
        .split(text)
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}
