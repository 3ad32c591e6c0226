use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

fn tag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<!--.*?-->|</?[A-Za-z!?][^<>]*>").expect("tag regex"))
}

fn paragraph_break_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\n[^\S\n]*\n\s*").expect("paragraph regex"))
}

/// Strips residual markup, folds text to ASCII and normalizes whitespace.
///
/// Non-ASCII characters go through compatibility decomposition (NFKD); the
/// ASCII part of the decomposition is kept and everything else is dropped.
/// Paragraph breaks (two or more newlines) survive as exactly one blank line.
pub fn clean_text(text: &str) -> String {
    let unix = text.replace("\r\n", "\n").replace('\r', "\n");
    let untagged = tag_re().replace_all(&unix, " ");
    let folded: String = untagged
        .nfkd()
        .filter(|c| c.is_ascii())
        .filter(|c| !c.is_ascii_control() || c.is_ascii_whitespace())
        .collect();

    paragraph_break_re()
        .split(&folded)
        .map(|para| para.split_ascii_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|para| !para.is_empty())
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transliterates_and_strips_tags() {
        assert_eq!(clean_text("café  <br/> bar"), "cafe bar");
    }

    #[test]
    fn empty_stays_empty() {
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text(" \n\n\t"), "");
    }

    #[test]
    fn paragraph_breaks_survive_as_one_blank_line() {
        assert_eq!(clean_text("a\nb\n\n\n\nc \n \n d"), "a b\n\nc\n\nd");
    }

    #[test]
    fn control_characters_removed() {
        assert_eq!(clean_text("a\u{0007}b\u{0000}c\u{007f}"), "abc");
    }

    #[test]
    fn compatibility_forms_fold() {
        assert_eq!(clean_text("ﬁle № 5 — Ångström"), "file No 5 Angstrom");
    }

    #[test]
    fn fixture_matches_two_pass_reference() {
        // Reference produced by fixtures/clean/oracle.py (strip tags, then fold to ASCII).
        let input = include_str!("../../fixtures/clean/mixed.txt");
        let expected = include_str!("../../fixtures/clean/mixed.expected.txt");
        assert_eq!(clean_text(input), expected.trim_end_matches('\n'));
    }
}
