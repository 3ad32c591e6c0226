//! Deterministic word/punctuation tokenizer used for every token budget.
//!
//! Words are maximal runs of alphanumeric characters; every other
//! non-whitespace character is a token of its own. Characters are lowercased
//! one at a time, and only when the lowercase form is a single character, so
//! each token maps onto a contiguous byte span of the source text.

use std::ops::Range;

/// A token together with its byte span in the text it was cut from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Range<usize>,
}

/// Pluggable tokenizer contract. Chunk budgets are counted with whatever
/// implementation the chunker is handed.
pub trait Tokenizer: Send + Sync {
    fn tokenize_spans(&self, text: &str) -> Vec<Token>;

    fn tokenize(&self, text: &str) -> Vec<String> {
        self.tokenize_spans(text).into_iter().map(|t| t.text).collect()
    }

    fn count(&self, text: &str) -> usize {
        self.tokenize_spans(text).len()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WordPunctTokenizer;

fn fold(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

impl Tokenizer for WordPunctTokenizer {
    fn tokenize_spans(&self, text: &str) -> Vec<Token> {
        let mut out = Vec::new();
        let mut word: Option<Token> = None;
        for (i, c) in text.char_indices() {
            let end = i + c.len_utf8();
            if c.is_whitespace() {
                out.extend(word.take());
                continue;
            }
            let f = fold(c);
            if f.is_alphanumeric() {
                match word.as_mut() {
                    Some(w) => {
                        w.text.push(f);
                        w.span.end = end;
                    }
                    None => {
                        word = Some(Token {
                            text: f.to_string(),
                            span: i..end,
                        })
                    }
                }
            } else {
                out.extend(word.take());
                out.push(Token {
                    text: f.to_string(),
                    span: i..end,
                });
            }
        }
        out.extend(word);
        out
    }
}

/// Tokenizes with the default [`WordPunctTokenizer`].
pub fn tokenize(text: &str) -> Vec<String> {
    WordPunctTokenizer.tokenize(text)
}

pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}
