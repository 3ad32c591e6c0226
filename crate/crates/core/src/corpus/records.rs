//! Flattening structured records into chunks that each carry the record's
//! key context.

use super::chunk::chunk_text_with;
use super::tokenize::{Tokenizer, WordPunctTokenizer};
use super::{Chunk, ChunkerConfig, CorpusError, StructuredRecord};

/// Renders `record` as `key: value` lines, chunks it, and prefixes every
/// chunk with whichever key-field lines it lacks.
///
/// When a prefixed chunk overshoots the budget, the body is re-chunked with a
/// smaller budget until every chunk fits. `overlap_prefix_tokens` keeps
/// counting the overlap carried inside the body; the key header sits in front
/// of it.
pub fn denormalize_records(
    doc_id: &str,
    record: &StructuredRecord,
    cfg: &ChunkerConfig,
) -> Result<Vec<Chunk>, CorpusError> {
    record.validate()?;
    cfg.validate()?;
    let tok = WordPunctTokenizer;
    let key_lines: Vec<String> = record
        .key_fields
        .iter()
        .filter_map(|key| {
            record
                .fields
                .iter()
                .find(|(k, _)| k == key)
                .map(|(k, v)| StructuredRecord::render_line(k, v))
        })
        .collect();
    let key_tokens = tok.count(&key_lines.join("\n"));
    if key_tokens > cfg.max_tokens {
        return Err(CorpusError::UnsplittableContext {
            needed: key_tokens,
            max_tokens: cfg.max_tokens,
        });
    }

    let rendered = record.render();
    let mut body_cfg = cfg.clone();
    loop {
        let mut chunks = chunk_text_with(doc_id, &rendered, &body_cfg, &tok)?;
        let mut worst = 0usize;
        for chunk in &mut chunks {
            let missing: Vec<&str> = key_lines
                .iter()
                .filter(|line| !contains_line(&chunk.text, line))
                .map(String::as_str)
                .collect();
            if !missing.is_empty() {
                chunk.text = format!("{}\n{}", missing.join("\n"), chunk.text);
                chunk.token_count = tok.count(&chunk.text);
            }
            worst = worst.max(chunk.token_count);
        }
        if worst <= cfg.max_tokens {
            return Ok(chunks);
        }
        let shrink = (worst - cfg.max_tokens).max(1);
        let next_max = body_cfg.max_tokens.saturating_sub(shrink);
        if next_max < 2 {
            return Err(CorpusError::UnsplittableContext {
                needed: key_tokens + 1,
                max_tokens: cfg.max_tokens,
            });
        }
        body_cfg.max_tokens = next_max;
        body_cfg.overlap_tokens = body_cfg.overlap_tokens.min(next_max / 2).max(1);
    }
}

fn contains_line(text: &str, line: &str) -> bool {
    text.lines().any(|l| l == line)
}
