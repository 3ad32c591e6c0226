//! Text-generation clients and numbered-list response parsing.

use std::sync::OnceLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{render_prompt, CandidateQuestion, PromptTemplate, QagenError, QuestionType};
use crate::annotate::EntityMention;
use crate::corpus::Chunk;
use crate::http::{join_url, HttpFailure, HttpSettings, JsonClient};
use crate::seed::derive_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f32,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f32,
    pub seed: u64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            max_tokens: 512,
            temperature: 0.0,
            seed: 0,
        }
    }
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<String, QagenError>;
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationOutput {
    pub questions: Vec<CandidateQuestion>,
    /// Set when the response contained no parseable numbered question.
    pub diagnostic: Option<String>,
}

fn item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d{1,3})[.)]\s+(.+?)\s*$").expect("item regex"))
}

fn label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([A-Za-z][A-Za-z \-]{0,40}?)\s*:\s+(.+)$").expect("label regex"))
}

/// Parses `<index>. <TypeLabel>: <question>` lines. Numbered lines without a
/// recognized label become `unknown`; anything else is dropped.
pub fn parse_questions(chunk_id: &str, response: &str, iteration: u32) -> GenerationOutput {
    let mut questions = Vec::new();
    for line in response.lines() {
        let Some(item) = item_re().captures(line) else {
            continue;
        };
        let body = item[2].trim();
        let (q_type, question) = match label_re().captures(body) {
            Some(cap) => match QuestionType::from_label(&cap[1]) {
                Some(t) => (t, cap[2].trim().to_string()),
                None => (QuestionType::Unknown, body.to_string()),
            },
            None => (QuestionType::Unknown, body.to_string()),
        };
        if question.is_empty() {
            continue;
        }
        questions.push(CandidateQuestion {
            chunk_id: chunk_id.to_string(),
            question,
            q_type,
            iteration,
        });
    }
    let diagnostic = questions.is_empty().then(|| {
        let preview: String = response.chars().take(80).collect();
        format!("no numbered questions in generator response for {chunk_id}: {preview:?}")
    });
    if let Some(d) = &diagnostic {
        tracing::warn!("{d}");
    }
    GenerationOutput {
        questions,
        diagnostic,
    }
}

/// Renders the prompt, calls the client once, and parses the reply.
pub fn generate(
    chunk: &Chunk,
    client: &dyn TextGenerator,
    template: &PromptTemplate,
    entity: Option<&EntityMention>,
    n: usize,
    iteration: u32,
    params: GenerationParams,
) -> Result<GenerationOutput, QagenError> {
    let prompt = render_prompt(template, chunk, entity, n)?;
    let request = GenerationRequest {
        prompt,
        max_tokens: params.max_tokens,
        temperature: params.temperature,
        seed: params.seed,
    };
    let text = client.generate(&request)?;
    Ok(parse_questions(&chunk.id, &text, iteration))
}

/// HTTP client for `POST {base}/v1/generate`.
pub struct HttpGenerator {
    url: String,
    client: JsonClient,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

impl HttpGenerator {
    pub fn new(base_url: &str, settings: HttpSettings) -> Self {
        HttpGenerator {
            url: join_url(base_url, "/v1/generate"),
            client: JsonClient::new(settings),
        }
    }
}

impl TextGenerator for HttpGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String, QagenError> {
        match self.client.post::<_, GenerateResponse>(&self.url, request) {
            Ok(r) => Ok(r.text),
            Err(HttpFailure::Transport { attempts, message }) => {
                Err(QagenError::Transport { attempts, message })
            }
            Err(HttpFailure::Protocol(m)) => Err(QagenError::Protocol(m)),
        }
    }
}

/// Offline generator producing cloze questions over the sentences of the
/// prompt's CONTEXT section. Output depends only on the prompt and the seed.
#[derive(Debug, Clone)]
pub struct StubGenerator {
    pub seed: u64,
    pub default_n: usize,
}

impl Default for StubGenerator {
    fn default() -> Self {
        StubGenerator {
            seed: 7,
            default_n: 3,
        }
    }
}

const STUB_TYPES: [QuestionType; 8] = QuestionType::LABELED;
const MAX_CLOZE_WORDS: usize = 30;

fn count_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Generate (\d+) questions").expect("count regex"))
}

fn entity_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"around the entity ‘(.+?)’ of type").expect("entity regex"))
}

fn context_of(prompt: &str) -> &str {
    let Some(pos) = prompt.find("CONTEXT: ") else {
        return "";
    };
    let rest = &prompt[pos + "CONTEXT: ".len()..];
    match rest.find("\n\nEXAMPLE:") {
        Some(end) => &rest[..end],
        None => rest,
    }
}

fn sentences(context: &str) -> Vec<Vec<&str>> {
    context
        .split(|c| c == '.' || c == '?' || c == '!' || c == '\n')
        .map(|s| s.split_whitespace().collect::<Vec<_>>())
        .filter(|words| words.len() >= 4)
        .collect()
}

fn is_blankable(word: &str) -> bool {
    let core = word.trim_matches(|c: char| !c.is_alphanumeric());
    core.chars().count() >= 4
        && core.chars().all(char::is_alphanumeric)
        && !super::STOPWORDS.contains(&core.to_ascii_lowercase().as_str())
}

impl TextGenerator for StubGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String, QagenError> {
        let n = count_re()
            .captures(&request.prompt)
            .and_then(|c| c[1].parse().ok())
            .unwrap_or(self.default_n);
        let entity = entity_re().captures(&request.prompt).map(|c| c[1].to_string());
        let context = context_of(&request.prompt);
        let sents = sentences(context);
        if sents.is_empty() || n == 0 {
            return Ok("The context does not contain enough material for questions.".into());
        }
        let mut rng = derive_rng(self.seed ^ request.seed, &[b"stub-generator", context.as_bytes()]);
        let offset = rng.gen_range(0..STUB_TYPES.len());
        let mut lines = Vec::with_capacity(n);
        for i in 0..n {
            let words = &sents[i % sents.len()];
            let candidates: Vec<usize> = (0..words.len()).filter(|&w| is_blankable(words[w])).collect();
            let blank = if candidates.is_empty() {
                words.len() / 2
            } else {
                candidates[(rng.gen_range(0..candidates.len()) + i / sents.len()) % candidates.len()]
            };
            let lo = blank.saturating_sub(MAX_CLOZE_WORDS / 2);
            let hi = (lo + MAX_CLOZE_WORDS).min(words.len());
            let statement: Vec<String> = (lo..hi)
                .map(|w| {
                    if w == blank {
                        "____".to_string()
                    } else {
                        words[w].trim_matches('"').to_string()
                    }
                })
                .collect();
            let q_type = STUB_TYPES[(offset + i) % STUB_TYPES.len()];
            let lead = match &entity {
                Some(e) => format!("Regarding {e}, which term completes"),
                None => "Which term completes".to_string(),
            };
            lines.push(format!(
                "{}. {}: {} the statement \"{}\"?",
                i + 1,
                q_type.label(),
                lead,
                statement.join(" ")
            ));
        }
        Ok(lines.join("\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1_ENTITY_ANSWER: &str = "1. Factual: What is the name of the platform that Infosys is using to engage partners and their guests digitally at the Australian Open?\n\n2. Reasoning-based: How does the Infosys Meridian platform contribute to redefining the tennis experience at the Australian Open?\n\n3. Scenario-based: Imagine you are a guest of a partner of the Australian Open who cannot attend the event physically. How might the Infosys Meridian platform help you engage with the tournament?";

    const LISTING_ANSWER: &str = "1.  Factual: What is the primary focus of Finacle in helping banks?\n2.  Clarification: Can you elaborate on how Finacle helps banks engage with their customers, employees, and partners?\n3.  Scenario based: Suppose a bank wants to improve its customer engagement. How can Finacle help achieve this goal?\n4.  Consequence related: What benefits have banks experienced after implementing Finacle, particularly in terms of their NPS scores?\n5.  Extractive: What percentage improvement have banks seen in their NPS scores when using Finacle?\n6.  Reasoning based: What might be some reasons behind the effectiveness of Finacle in enhancing customer engagement for banks?";

    struct Canned(&'static str);

    impl TextGenerator for Canned {
        fn generate(&self, _: &GenerationRequest) -> Result<String, QagenError> {
            Ok(self.0.to_string())
        }
    }

    fn chunk(text: &str) -> Chunk {
        Chunk {
            id: "c1".into(),
            doc_id: "d".into(),
            seq: 0,
            text: text.into(),
            token_count: 0,
            overlap_prefix_tokens: 0,
        }
    }

    fn run(client: &dyn TextGenerator) -> GenerationOutput {
        let t = PromptTemplate::builtin("generic_n").unwrap();
        generate(&chunk("ctx"), client, &t, None, 3, 1, GenerationParams::default()).unwrap()
    }

    #[test]
    fn table1_entity_answer() {
        let out = run(&Canned(TABLE1_ENTITY_ANSWER));
        let types: Vec<_> = out.questions.iter().map(|q| q.q_type).collect();
        assert_eq!(
            types,
            vec![QuestionType::Factual, QuestionType::Reasoning, QuestionType::Scenario]
        );
        assert!(out.questions[2].question.starts_with("Imagine you are a guest"));
        assert!(out.diagnostic.is_none());
    }

    #[test]
    fn listing_answer_has_six_labeled_types() {
        let out = run(&Canned(LISTING_ANSWER));
        let types: Vec<_> = out.questions.iter().map(|q| q.q_type).collect();
        assert_eq!(
            types,
            vec![
                QuestionType::Factual,
                QuestionType::Clarification,
                QuestionType::Scenario,
                QuestionType::Consequence,
                QuestionType::Extractive,
                QuestionType::Reasoning
            ]
        );
        assert_eq!(out.questions[0].question, "What is the primary focus of Finacle in helping banks?");
    }

    #[test]
    fn prose_yields_empty_with_diagnostic() {
        let out = run(&Canned("Sure! Here are some thoughts about the text without numbering."));
        assert!(out.questions.is_empty());
        assert!(out.diagnostic.is_some());
    }

    #[test]
    fn unlabeled_numbered_line_is_unknown() {
        let out = parse_questions("c", "1. Why is the sky blue?\n2) Musings: what now?\nnot numbered?", 2);
        assert_eq!(out.questions.len(), 2);
        assert!(out.questions.iter().all(|q| q.q_type == QuestionType::Unknown));
        assert_eq!(out.questions[1].question, "Musings: what now?");
        assert_eq!(out.questions[0].iteration, 2);
    }

    #[test]
    fn stub_is_deterministic_and_typed() {
        let text = "Finacle helps banks engage better with their customers. Built on a unique engagement hub, the suite helps banks onboard customers. Banks running Finacle report better scores.";
        let t = PromptTemplate::builtin("generic_n").unwrap();
        let stub = StubGenerator::default();
        let a = generate(&chunk(text), &stub, &t, None, 5, 1, GenerationParams::default()).unwrap();
        let b = generate(&chunk(text), &stub, &t, None, 5, 1, GenerationParams::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.questions.len(), 5);
        assert!(a.questions.iter().all(|q| q.q_type != QuestionType::Unknown));
        assert!(a.questions.iter().all(|q| q.question.ends_with('?')));
    }

    #[test]
    fn stub_uses_entity() {
        let t = PromptTemplate::builtin("entity").unwrap();
        let e = EntityMention {
            chunk_id: "c1".into(),
            start: 0,
            end: 7,
            surface: "Finacle".into(),
            entity_type: "Product".into(),
            annotator: "merged".into(),
        };
        let out = generate(
            &chunk("Finacle helps banks engage better with their customers."),
            &StubGenerator::default(),
            &t,
            Some(&e),
            2,
            1,
            GenerationParams::default(),
        )
        .unwrap();
        assert!(out.questions.iter().all(|q| q.question.contains("Regarding Finacle")));
    }

    #[test]
    fn stub_on_empty_context() {
        let t = PromptTemplate::builtin("generic_n").unwrap();
        let out = generate(&chunk(""), &StubGenerator::default(), &t, None, 3, 1, GenerationParams::default()).unwrap();
        assert!(out.questions.is_empty());
    }
}
