//! Text extraction from plain text, HTML and markdown payloads.

use pulldown_cmark::{Event, Options, Parser, Tag, TagEnd};

use super::{Document, Source};

const PARAGRAPH_TAGS: &[&str] = &[
    "p", "div", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "table", "section", "article",
    "header", "footer", "nav", "aside", "main", "blockquote", "pre", "form", "fieldset", "dl",
    "figure", "address", "hr", "body", "html", "title",
];
const LINE_TAGS: &[&str] = &["br", "li", "tr", "dt", "dd", "caption", "option"];
const CELL_TAGS: &[&str] = &["td", "th"];
const SKIP_BODY_TAGS: &[&str] = &["script", "style", "noscript", "template", "head"];

/// Decodes `raw` (lossily) and extracts its textual content.
pub fn extract_text(raw: &[u8], source: Source) -> String {
    if looks_binary(raw) {
        return String::new();
    }
    let decoded = String::from_utf8_lossy(raw);
    match source {
        Source::PlainText | Source::StructuredRecords => decoded.into_owned(),
        Source::Html => strip_html(&decoded),
        Source::Markdown => strip_markdown(&decoded),
    }
}

pub fn extract_document(id: &str, raw: &[u8], source: Source) -> Document {
    Document::new(id, source, extract_text(raw, source))
}

fn looks_binary(raw: &[u8]) -> bool {
    if raw.contains(&0) {
        return true;
    }
    let decoded = String::from_utf8_lossy(raw);
    let total = decoded.chars().count();
    if total == 0 {
        return false;
    }
    let junk = decoded
        .chars()
        .filter(|c| *c == char::REPLACEMENT_CHARACTER || (c.is_control() && !c.is_whitespace()))
        .count();
    junk * 10 > total
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let n = needle.as_bytes();
    haystack
        .as_bytes()
        .windows(n.len())
        .position(|w| w.eq_ignore_ascii_case(n))
}

/// End of a tag starting at `<`, honouring quoted attribute values.
fn tag_end(s: &str) -> Option<usize> {
    let mut quote: Option<u8> = None;
    for (i, b) in s.bytes().enumerate().skip(1) {
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => return Some(i + 1),
            None => {}
        }
    }
    None
}

pub(crate) fn strip_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut rest = html;
    let push_text = |out: &mut String, t: &str| {
        // source line breaks inside HTML are ordinary whitespace
        out.extend(t.chars().map(|c| if c.is_whitespace() { ' ' } else { c }));
    };
    while let Some(lt) = rest.find('<') {
        push_text(&mut out, &rest[..lt]);
        rest = &rest[lt..];
        if rest.starts_with("<!--") {
            rest = match rest.find("-->") {
                Some(end) => &rest[end + 3..],
                None => "",
            };
            continue;
        }
        let next = rest[1..].chars().next();
        let is_tag = matches!(next, Some(c) if c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?');
        if !is_tag {
            out.push('<');
            rest = &rest[1..];
            continue;
        }
        let Some(end) = tag_end(rest) else {
            // unterminated tag swallows the remainder
            rest = "";
            break;
        };
        let inner = &rest[1..end - 1];
        let closing = inner.starts_with('/');
        let name: String = inner
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        rest = &rest[end..];

        if !closing && !inner.ends_with('/') && SKIP_BODY_TAGS.contains(&name.as_str()) {
            let close = format!("</{name}");
            rest = match find_ci(rest, &close) {
                Some(pos) => {
                    let after = &rest[pos..];
                    match tag_end(after) {
                        Some(e) => &after[e..],
                        None => "",
                    }
                }
                None => "",
            };
            continue;
        }
        if PARAGRAPH_TAGS.contains(&name.as_str()) {
            out.push_str("\n\n");
        } else if !closing && LINE_TAGS.contains(&name.as_str()) {
            out.push('\n');
        } else if CELL_TAGS.contains(&name.as_str()) {
            out.push(' ');
        }
    }
    push_text(&mut out, rest);
    let decoded = html_escape::decode_html_entities(&out);
    normalize_layout(&decoded)
}

pub(crate) fn strip_markdown(md: &str) -> String {
    let mut out = String::with_capacity(md.len());
    let mut image_depth = 0usize;
    let parser = Parser::new_ext(md, Options::ENABLE_TABLES | Options::ENABLE_STRIKETHROUGH);
    for event in parser {
        if image_depth > 0 {
            match event {
                Event::Start(Tag::Image { .. }) => image_depth += 1,
                Event::End(TagEnd::Image) => image_depth -= 1,
                _ => {}
            }
            continue;
        }
        match event {
            Event::Start(Tag::Image { .. }) => image_depth = 1,
            Event::Text(t) | Event::Code(t) => out.push_str(&t),
            Event::Html(h) | Event::InlineHtml(h) => {
                let stripped = strip_html(&h);
                if !stripped.is_empty() {
                    out.push(' ');
                    out.push_str(&stripped);
                }
            }
            Event::SoftBreak | Event::HardBreak => out.push('\n'),
            Event::Rule => out.push_str("\n\n"),
            Event::End(end) => match end {
                TagEnd::Paragraph
                | TagEnd::Heading(_)
                | TagEnd::BlockQuote(_)
                | TagEnd::CodeBlock
                | TagEnd::List(_)
                | TagEnd::Table => out.push_str("\n\n"),
                TagEnd::Item | TagEnd::TableHead | TagEnd::TableRow => out.push('\n'),
                TagEnd::TableCell => out.push(' '),
                _ => {}
            },
            _ => {}
        }
    }
    normalize_layout(&out)
}

/// Collapses horizontal whitespace within lines, trims lines, and squeezes
/// runs of empty lines into one blank line.
pub(crate) fn normalize_layout(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut blank_run = 0usize;
    for line in text.lines() {
        let collapsed = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            blank_run += 1;
            continue;
        }
        if !out.is_empty() {
            out.push_str(if blank_run > 0 { "\n\n" } else { "\n" });
        }
        out.push_str(&collapsed);
        blank_run = 0;
    }
    out
}
