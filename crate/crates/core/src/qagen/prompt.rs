use std::path::Path;
use std::sync::OnceLock;

use regex::{Captures, Regex};

use super::QagenError;
use crate::annotate::EntityMention;
use crate::corpus::Chunk;

const PLACEHOLDERS: [&str; 4] = ["text", "entity", "entity_type", "n"];

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("placeholder regex"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub requires_entity: bool,
}

impl PromptTemplate {
    /// Validates placeholders; `requires_entity` follows from `{entity}`.
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Result<Self, QagenError> {
        let name = name.into();
        let body = body.into();
        let err = |reason: String| QagenError::Template {
            name: name.clone(),
            reason,
        };
        for cap in placeholder_re().captures_iter(&body) {
            if !PLACEHOLDERS.contains(&&cap[1]) {
                return Err(err(format!("unknown placeholder {{{}}}", &cap[1])));
            }
        }
        if !body.contains("{text}") {
            return Err(err("body has no {text} placeholder".into()));
        }
        let requires_entity = body.contains("{entity}");
        if body.contains("{entity_type}") && !requires_entity {
            return Err(err("{entity_type} without {entity}".into()));
        }
        Ok(PromptTemplate {
            name,
            body,
            requires_entity,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, QagenError> {
        let body = std::fs::read_to_string(path).map_err(|source| QagenError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "template".into());
        Self::new(name, body)
    }

    /// Built-in templates: `generic` (typed example listing), `generic_n`
    /// (count-driven) and `entity` (entity-aware).
    pub fn builtin(name: &str) -> Option<Self> {
        let body = match name {
            "generic" => include_str!("../../templates/generic.txt"),
            "generic_n" => include_str!("../../templates/generic_n.txt"),
            "entity" => include_str!("../../templates/entity.txt"),
            _ => return None,
        };
        Some(Self::new(name, body.trim_end()).expect("built-in template is valid"))
    }
}

pub fn render_prompt(
    template: &PromptTemplate,
    chunk: &Chunk,
    entity: Option<&EntityMention>,
    n: usize,
) -> Result<String, QagenError> {
    match (template.requires_entity, entity) {
        (true, None) => return Err(QagenError::MissingEntity(template.name.clone())),
        (false, Some(_)) => return Err(QagenError::UnexpectedEntity(template.name.clone())),
        _ => {}
    }
    let rendered = placeholder_re().replace_all(&template.body, |cap: &Captures| match &cap[1] {
        "text" => chunk.text.clone(),
        "entity" => entity.map(|e| e.surface.clone()).unwrap_or_default(),
        "entity_type" => entity.map(|e| e.entity_type.clone()).unwrap_or_default(),
        "n" => n.to_string(),
        other => format!("{{{other}}}"),
    });
    Ok(rendered.into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(text: &str) -> Chunk {
        Chunk {
            id: "c".into(),
            doc_id: "d".into(),
            seq: 0,
            text: text.into(),
            token_count: 0,
            overlap_prefix_tokens: 0,
        }
    }

    fn meridian() -> EntityMention {
        EntityMention {
            chunk_id: "c".into(),
            start: 0,
            end: 16,
            surface: "Infosys Meridian".into(),
            entity_type: "Platform".into(),
            annotator: "merged".into(),
        }
    }

    #[test]
    fn generic_contains_text_and_header() {
        let t = PromptTemplate::builtin("generic").unwrap();
        assert!(!t.requires_entity);
        let out = render_prompt(&t, &chunk("Finacle helps banks {n} engage."), None, 6).unwrap();
        assert!(out.starts_with("INSTRUCTIONS: Generate a variety of questions"));
        assert!(out.contains("CONTEXT: Finacle helps banks {n} engage.\n"));
        assert!(out.contains("Example Questions:"));
    }

    #[test]
    fn entity_template() {
        let t = PromptTemplate::builtin("entity").unwrap();
        assert!(t.requires_entity);
        let out = render_prompt(&t, &chunk("Virtual Hub"), Some(&meridian()), 3).unwrap();
        assert!(out.contains("Generate 3 questions"));
        assert!(out.contains("around the entity ‘Infosys Meridian’ of type Platform."));
        assert!(!placeholder_re().is_match(&out));
    }

    #[test]
    fn entity_contract() {
        let generic = PromptTemplate::builtin("generic_n").unwrap();
        assert!(matches!(
            render_prompt(&generic, &chunk("x"), Some(&meridian()), 3),
            Err(QagenError::UnexpectedEntity(_))
        ));
        let entity = PromptTemplate::builtin("entity").unwrap();
        assert!(matches!(
            render_prompt(&entity, &chunk("x"), None, 3),
            Err(QagenError::MissingEntity(_))
        ));
    }

    #[test]
    fn load_time_validation() {
        assert!(PromptTemplate::new("t", "CONTEXT: {text} {audience}").is_err());
        assert!(PromptTemplate::new("t", "no text here").is_err());
        assert!(PromptTemplate::new("t", "{text} {entity_type}").is_err());
        assert!(PromptTemplate::new("t", "{text} {entity} {entity_type} {n}").unwrap().requires_entity);
    }
}
