//! Pattern and dictionary PII recognizers with span merging and
//! length-preserving asterisk masking.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// A masked region, as byte offsets into the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpan {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

/// Anything that can point at PII in a text.
pub trait Recognizer: Send + Sync {
    fn kind(&self) -> &str;
    fn find(&self, text: &str) -> Vec<(usize, usize)>;
}

struct PatternRecognizer {
    kind: &'static str,
    re: Regex,
    validate: Option<fn(&str) -> bool>,
}

impl Recognizer for PatternRecognizer {
    fn kind(&self) -> &str {
        self.kind
    }

    fn find(&self, text: &str) -> Vec<(usize, usize)> {
        self.re
            .find_iter(text)
            .filter(|m| self.validate.map_or(true, |v| v(m.as_str())))
            .map(|m| (m.start(), m.end()))
            .collect()
    }
}

/// Exact surface matches from a name list, on word boundaries.
pub struct DictionaryRecognizer {
    kind: String,
    surfaces: Vec<String>,
}

impl DictionaryRecognizer {
    pub fn new(kind: impl Into<String>, surfaces: &[String]) -> Self {
        let mut surfaces: Vec<String> = surfaces
            .iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        surfaces.sort();
        surfaces.dedup();
        DictionaryRecognizer {
            kind: kind.into(),
            surfaces,
        }
    }
}

fn is_word_char(c: Option<char>) -> bool {
    c.is_some_and(|c| c.is_alphanumeric())
}

pub(crate) fn on_word_boundary(text: &str, start: usize, end: usize) -> bool {
    !is_word_char(text[..start].chars().next_back()) && !is_word_char(text[end..].chars().next())
}

impl Recognizer for DictionaryRecognizer {
    fn kind(&self) -> &str {
        &self.kind
    }

    fn find(&self, text: &str) -> Vec<(usize, usize)> {
        let mut hits = Vec::new();
        for surface in &self.surfaces {
            for (start, m) in text.match_indices(surface.as_str()) {
                let end = start + m.len();
                if on_word_boundary(text, start, end) {
                    hits.push((start, end));
                }
            }
        }
        hits
    }
}

fn luhn_valid(candidate: &str) -> bool {
    let digits: Vec<u32> = candidate.chars().filter_map(|c| c.to_digit(10)).collect();
    if !(13..=19).contains(&digits.len()) {
        return false;
    }
    let sum: u32 = digits
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &d)| {
            if i % 2 == 1 {
                let dd = d * 2;
                if dd > 9 {
                    dd - 9
                } else {
                    dd
                }
            } else {
                d
            }
        })
        .sum();
    sum % 10 == 0
}

fn phone_digits_ok(candidate: &str) -> bool {
    let n = candidate.chars().filter(char::is_ascii_digit).count();
    (7..=15).contains(&n)
}

fn builtin_recognizers() -> &'static [PatternRecognizer] {
    static SET: OnceLock<Vec<PatternRecognizer>> = OnceLock::new();
    SET.get_or_init(|| {
        vec![
            PatternRecognizer {
                kind: "EMAIL",
                re: Regex::new(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)*\.[A-Za-z]{2,}")
                    .expect("email regex"),
                validate: None,
            },
            PatternRecognizer {
                kind: "PHONE",
                // international: +CC then 2-5 groups; US: (NPA) NXX-XXXX and variants
                re: Regex::new(
                    r"(?:\+\d{1,3}[ .\-]?(?:\(\d{1,4}\)[ .\-]?)?\d{1,4}(?:[ .\-]?\d{2,4}){1,4}\b)|(?:(?:\b1[ .\-])?(?:\(\d{3}\)\s?|\b\d{3}[ .\-])\d{3}[ .\-]\d{4}\b)",
                )
                .expect("phone regex"),
                validate: Some(phone_digits_ok),
            },
            PatternRecognizer {
                kind: "CREDIT_CARD",
                re: Regex::new(r"\b\d(?:[ \-]?\d){12,18}\b").expect("card regex"),
                validate: Some(luhn_valid),
            },
            PatternRecognizer {
                kind: "IPV4",
                re: Regex::new(
                    r"\b(?:(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\.){3}(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\b",
                )
                .expect("ipv4 regex"),
                validate: None,
            },
        ]
    })
}

/// Built-in recognizers plus any extra ones (e.g. name dictionaries).
pub struct PiiMasker {
    extra: Vec<Box<dyn Recognizer>>,
}

impl Default for PiiMasker {
    fn default() -> Self {
        PiiMasker::new()
    }
}

impl PiiMasker {
    pub fn new() -> Self {
        PiiMasker { extra: Vec::new() }
    }

    pub fn with_dictionary(mut self, surfaces: &[String]) -> Self {
        if !surfaces.is_empty() {
            self.extra
                .push(Box::new(DictionaryRecognizer::new("PERSON-DICT", surfaces)));
        }
        self
    }

    pub fn with_recognizer(mut self, recognizer: Box<dyn Recognizer>) -> Self {
        self.extra.push(recognizer);
        self
    }

    pub fn detect(&self, text: &str) -> Vec<MaskSpan> {
        let mut raw: Vec<(usize, usize, String)> = Vec::new();
        for r in builtin_recognizers() {
            raw.extend(r.find(text).into_iter().map(|(s, e)| (s, e, r.kind().to_string())));
        }
        for r in &self.extra {
            raw.extend(r.find(text).into_iter().map(|(s, e)| (s, e, r.kind().to_string())));
        }
        merge_spans(raw)
    }

    /// Replaces every merged span with `*` repeated to its byte length, so the
    /// masked text has the same length and offsets as the input.
    pub fn mask(&self, text: &str) -> (String, Vec<MaskSpan>) {
        let spans = self.detect(text);
        let mut out = String::with_capacity(text.len());
        let mut cursor = 0;
        for span in &spans {
            out.push_str(&text[cursor..span.start]);
            out.extend(std::iter::repeat('*').take(span.end - span.start));
            cursor = span.end;
        }
        out.push_str(&text[cursor..]);
        (out, spans)
    }
}

fn merge_spans(mut raw: Vec<(usize, usize, String)>) -> Vec<MaskSpan> {
    raw.retain(|(s, e, _)| s < e);
    raw.sort();
    let mut merged: Vec<(usize, usize, Vec<String>)> = Vec::new();
    for (s, e, kind) in raw {
        match merged.last_mut() {
            Some(last) if s < last.1 => {
                last.1 = last.1.max(e);
                if !last.2.contains(&kind) {
                    last.2.push(kind);
                }
            }
            _ => merged.push((s, e, vec![kind])),
        }
    }
    merged
        .into_iter()
        .map(|(start, end, mut kinds)| {
            kinds.sort();
            MaskSpan {
                start,
                end,
                kind: kinds.join("+"),
            }
        })
        .collect()
}

pub fn mask_pii(text: &str, extra_dictionary: &[String]) -> (String, Vec<MaskSpan>) {
    PiiMasker::new().with_dictionary(extra_dictionary).mask(text)
}
