//! Entity pre-annotation against a curated dictionary, annotator batch
//! assembly, and the three-way unanimous merge.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Chunk;

pub const AUTO_ANNOTATOR: &str = "auto";
pub const MERGED_ANNOTATOR: &str = "merged";
pub const DEFAULT_BATCH_SIZE: usize = 50;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("entity dictionary is empty")]
    EmptyDictionary,
    #[error("invalid dictionary entry at row {row}: {reason}")]
    InvalidEntry { row: usize, reason: String },
    #[error("duplicate dictionary entry ({surface:?}, {entity_type:?})")]
    DuplicateEntry { surface: String, entity_type: String },
    #[error("annotator pool has {0} distinct ids; unanimity needs at least 3")]
    PoolTooSmall(usize),
    #[error("batch_size must be positive")]
    ZeroBatchSize,
    #[error("reading dictionary {path}: {message}")]
    Csv { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityDictEntry {
    pub surface: String,
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub chunk_id: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub entity_type: String,
    pub annotator: String,
}

impl EntityMention {
    fn agreement_key(&self) -> (&str, usize, usize, &str) {
        (&self.chunk_id, self.start, self.end, &self.entity_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationBatch {
    pub batch_id: String,
    pub chunk_ids: Vec<String>,
    pub annotators: Vec<String>,
}

/// Checks entries and rejects duplicates.
pub fn validate_dictionary(dict: &[EntityDictEntry]) -> Result<(), AnnotateError> {
    if dict.is_empty() {
        return Err(AnnotateError::EmptyDictionary);
    }
    let mut seen = HashSet::new();
    for (i, e) in dict.iter().enumerate() {
        if e.surface.is_empty() || e.surface.trim() != e.surface {
            return Err(AnnotateError::InvalidEntry {
                row: i + 1,
                reason: format!("surface {:?} is empty or padded", e.surface),
            });
        }
        if e.entity_type.trim().is_empty() {
            return Err(AnnotateError::InvalidEntry {
                row: i + 1,
                reason: "empty entity_type".into(),
            });
        }
        if !seen.insert((e.surface.as_str(), e.entity_type.as_str())) {
            return Err(AnnotateError::DuplicateEntry {
                surface: e.surface.clone(),
                entity_type: e.entity_type.clone(),
            });
        }
    }
    Ok(())
}

/// Loads a `surface,entity_type` CSV with a header row.
pub fn load_dictionary(path: &Path) -> Result<Vec<EntityDictEntry>, AnnotateError> {
    let csv_err = |e: csv::Error| AnnotateError::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row.map_err(csv_err)?);
    }
    validate_dictionary(&out)?;
    Ok(out)
}

fn is_word_char(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphanumeric)
}

fn find_all(haystack: &str, needle: &str, case_insensitive: bool) -> Vec<usize> {
    if !case_insensitive {
        return haystack.match_indices(needle).map(|(i, _)| i).collect();
    }
    let n = needle.as_bytes();
    haystack
        .as_bytes()
        .windows(n.len())
        .enumerate()
        .filter(|(i, w)| haystack.is_char_boundary(*i) && w.eq_ignore_ascii_case(n))
        .map(|(i, _)| i)
        .collect()
}

/// Finds dictionary surfaces in a chunk on word boundaries.
///
/// Overlapping candidates resolve by longest surface first, then earliest
/// start, then entity type. Case-insensitive matching folds ASCII letters only,
/// which keeps byte offsets identical to the source.
pub fn pre_annotate(
    chunk: &Chunk,
    dict: &[EntityDictEntry],
    case_insensitive: bool,
) -> Result<Vec<EntityMention>, AnnotateError> {
    if dict.is_empty() {
        return Err(AnnotateError::EmptyDictionary);
    }
    let text = chunk.text.as_str();
    let mut candidates: Vec<(usize, usize, &EntityDictEntry)> = Vec::new();
    for entry in dict {
        if entry.surface.is_empty() {
            continue;
        }
        for start in find_all(text, &entry.surface, case_insensitive) {
            let end = start + entry.surface.len();
            if !text.is_char_boundary(end) {
                continue;
            }
            if is_word_char(text[..start].chars().next_back()) || is_word_char(text[end..].chars().next()) {
                continue;
            }
            candidates.push((start, end, entry));
        }
    }
    candidates.sort_by(|a, b| {
        (b.1 - b.0)
            .cmp(&(a.1 - a.0))
            .then(a.0.cmp(&b.0))
            .then(a.2.entity_type.cmp(&b.2.entity_type))
    });

    let mut taken: Vec<(usize, usize)> = Vec::new();
    let mut mentions = Vec::new();
    for (start, end, entry) in candidates {
        if taken.iter().any(|&(s, e)| start < e && s < end) {
            continue;
        }
        taken.push((start, end));
        mentions.push(EntityMention {
            chunk_id: chunk.id.clone(),
            start,
            end,
            surface: text[start..end].to_string(),
            entity_type: entry.entity_type.clone(),
            annotator: AUTO_ANNOTATOR.to_string(),
        });
    }
    mentions.sort_by_key(|m| m.start);
    Ok(mentions)
}

/// Partitions chunk ids into batches and assigns three distinct annotators to
/// each, round-robin over the pool.
pub fn make_batches(
    chunk_ids: &[String],
    batch_size: usize,
    annotator_pool: &[String],
) -> Result<Vec<AnnotationBatch>, AnnotateError> {
    if batch_size == 0 {
        return Err(AnnotateError::ZeroBatchSize);
    }
    let mut pool: Vec<&String> = Vec::new();
    for a in annotator_pool {
        if !pool.contains(&a) {
            pool.push(a);
        }
    }
    if pool.len() < 3 {
        return Err(AnnotateError::PoolTooSmall(pool.len()));
    }
    Ok(chunk_ids
        .chunks(batch_size)
        .enumerate()
        .map(|(i, ids)| AnnotationBatch {
            batch_id: format!("batch-{:04}", i + 1),
            chunk_ids: ids.to_vec(),
            annotators: (0..3)
                .map(|j| pool[(3 * i + j) % pool.len()].clone())
                .collect(),
        })
        .collect())
}

/// Keeps exactly the mentions whose (chunk, start, end, type) tuple appears in
/// all three annotators' lists.
pub fn merge_unanimous(
    a: &[EntityMention],
    b: &[EntityMention],
    c: &[EntityMention],
) -> Vec<EntityMention> {
    let in_b: HashSet<_> = b.iter().map(EntityMention::agreement_key).collect();
    let in_c: HashSet<_> = c.iter().map(EntityMention::agreement_key).collect();
    let mut seen = BTreeSet::new();
    let mut out: Vec<EntityMention> = a
        .iter()
        .filter(|m| {
            let key = m.agreement_key();
            in_b.contains(&key) && in_c.contains(&key) && seen.insert(key)
        })
        .map(|m| EntityMention {
            annotator: MERGED_ANNOTATOR.to_string(),
            ..m.clone()
        })
        .collect();
    out.sort_by(|x, y| {
        (&x.chunk_id, x.start, x.end, &x.entity_type).cmp(&(&y.chunk_id, y.start, y.end, &y.entity_type))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(id: &str, text: &str) -> Chunk {
        Chunk {
            id: id.into(),
            doc_id: "d".into(),
            seq: 0,
            text: text.into(),
            token_count: 0,
            overlap_prefix_tokens: 0,
        }
    }

    fn entry(s: &str, t: &str) -> EntityDictEntry {
        EntityDictEntry {
            surface: s.into(),
            entity_type: t.into(),
        }
    }

    #[test]
    fn longest_match_wins() {
        let dict = vec![entry("Infosys", "Company"), entry("Infosys Meridian", "Platform")];
        let m = pre_annotate(&chunk("c", "Powered by Infosys Meridian"), &dict, false).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].surface, "Infosys Meridian");
        assert_eq!(m[0].entity_type, "Platform");
        assert_eq!(m[0].annotator, "auto");
        assert_eq!((m[0].start, m[0].end), (11, 27));
    }

    #[test]
    fn both_found_when_disjoint() {
        let dict = vec![entry("Infosys", "Company"), entry("Infosys Meridian", "Platform")];
        let m = pre_annotate(&chunk("c", "Infosys built Infosys Meridian."), &dict, false).unwrap();
        let types: Vec<_> = m.iter().map(|m| m.entity_type.as_str()).collect();
        assert_eq!(types, vec!["Company", "Platform"]);
    }

    #[test]
    fn no_mid_word_hits() {
        let dict = vec![entry("Fin", "Product")];
        assert!(pre_annotate(&chunk("c", "Finacle and Finance"), &dict, false).unwrap().is_empty());
        assert_eq!(pre_annotate(&chunk("c", "Fin, again"), &dict, false).unwrap().len(), 1);
    }

    #[test]
    fn case_folding_is_opt_in() {
        let dict = vec![entry("Finacle", "Product")];
        assert!(pre_annotate(&chunk("c", "finacle rocks"), &dict, false).unwrap().is_empty());
        let m = pre_annotate(&chunk("c", "finacle rocks"), &dict, true).unwrap();
        assert_eq!(m[0].surface, "finacle");
    }

    #[test]
    fn empty_dictionary_rejected() {
        assert!(pre_annotate(&chunk("c", "x"), &[], false).is_err());
    }

    #[test]
    fn batches_of_fifty() {
        let ids: Vec<String> = (0..120).map(|i| format!("c{i}")).collect();
        let pool: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let batches = make_batches(&ids, 50, &pool).unwrap();
        let sizes: Vec<_> = batches.iter().map(|b| b.chunk_ids.len()).collect();
        assert_eq!(sizes, vec![50, 50, 20]);
        let one = make_batches(&ids[..50], 50, &pool).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].annotators, pool);
    }

    #[test]
    fn pool_of_five_over_ten_batches() {
        let ids: Vec<String> = (0..500).map(|i| format!("c{i}")).collect();
        let pool: Vec<String> = (1..=5).map(|i| format!("ann{i}")).collect();
        let batches = make_batches(&ids, 50, &pool).unwrap();
        assert_eq!(batches.len(), 10);
        for b in &batches {
            let distinct: HashSet<_> = b.annotators.iter().collect();
            assert_eq!(distinct.len(), 3);
        }
        for a in &pool {
            assert!(batches.iter().any(|b| b.annotators.contains(a)));
        }
    }

    #[test]
    fn small_pool_rejected() {
        let pool: Vec<String> = vec!["a".into(), "b".into(), "a".into()];
        assert!(matches!(
            make_batches(&["x".into()], 50, &pool),
            Err(AnnotateError::PoolTooSmall(2))
        ));
    }

    fn mention(chunk: &str, start: usize, ty: &str, who: &str) -> EntityMention {
        EntityMention {
            chunk_id: chunk.into(),
            start,
            end: start + 4,
            surface: "abcd".into(),
            entity_type: ty.into(),
            annotator: who.into(),
        }
    }

    #[test]
    fn unanimity() {
        let a = vec![mention("c1", 0, "T", "a"), mention("c1", 10, "T", "a")];
        let b = vec![mention("c1", 0, "T", "b"), mention("c1", 10, "T", "b")];
        let c = vec![mention("c1", 0, "T", "c")];
        let merged = merge_unanimous(&a, &b, &c);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].start, 0);
        assert_eq!(merged[0].annotator, "merged");
    }

    #[test]
    fn type_disagreement_drops() {
        let a = vec![mention("c1", 0, "T", "a")];
        let b = vec![mention("c1", 0, "U", "b")];
        assert!(merge_unanimous(&a, &b, &a).is_empty());
    }

    #[test]
    fn dictionary_validation() {
        assert!(validate_dictionary(&[entry(" x", "T")]).is_err());
        assert!(validate_dictionary(&[entry("x", "T"), entry("x", "T")]).is_err());
        assert!(validate_dictionary(&[entry("x", "T"), entry("x", "U")]).is_ok());
    }
}
