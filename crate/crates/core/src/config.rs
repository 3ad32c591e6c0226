//! The single TOML file that wires every stage together.
//!
//! Relative paths resolve against the directory holding the config file.
//! Errors point at `file:line:column` of the offending key.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::corpus::ChunkerConfig;
use crate::qagen::{CurationRules, SplitConfig};
use crate::retrieval::{MiningConfig, PipelineConfig, RerankerKind, RetrieverKind, DEFAULT_K_FINAL, DEFAULT_K_RETRIEVE};

#[derive(Debug, Error)]
#[error("{path}:{line}:{column}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub chunker: ChunkerConfig,
    #[serde(default)]
    pub mask: MaskSection,
    #[serde(default)]
    pub annotate: AnnotateSection,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub curation: CurationRules,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub mining: MiningSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub providers: BTreeMap<String, ProviderDecl>,
    #[serde(default)]
    pub pipelines: Vec<PipelineDecl>,
    /// Directory of the config file; not read from TOML.
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    pub source_path: String,
    #[serde(skip)]
    pub source_text: String,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub documents: Option<PathBuf>,
    pub chunks: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MaskSection {
    /// One name per line.
    pub dictionary: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotateSection {
    pub dictionary: Option<PathBuf>,
    pub case_insensitive: bool,
    pub batch_size: usize,
    pub annotators: Vec<String>,
}

impl Default for AnnotateSection {
    fn default() -> Self {
        AnnotateSection {
            dictionary: None,
            case_insensitive: false,
            batch_size: crate::annotate::DEFAULT_BATCH_SIZE,
            annotators: vec!["annotator-1".into(), "annotator-2".into(), "annotator-3".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GenerationBackend {
    #[default]
    Stub,
    Http,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSection {
    pub backend: GenerationBackend,
    pub base_url: Option<String>,
    pub auth_token: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
    /// Built-in template name or a path to a template file.
    pub template: String,
    pub entity_template: String,
    pub n: usize,
    pub max_tokens: u32,
    pub temperature: f32,
    pub max_in_flight: usize,
    pub iteration: u32,
}

impl Default for GenerationSection {
    fn default() -> Self {
        GenerationSection {
            backend: GenerationBackend::Stub,
            base_url: None,
            auth_token: None,
            timeout_secs: 60,
            retries: 3,
            template: "generic_n".into(),
            entity_template: "entity".into(),
            n: 3,
            max_tokens: 512,
            temperature: 0.0,
            max_in_flight: 4,
            iteration: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train_fraction: f64,
    pub stratify_key: String,
}

impl Default for SplitSection {
    fn default() -> Self {
        let d = SplitConfig::default();
        SplitSection {
            train_fraction: d.train_fraction,
            stratify_key: d.stratify_key,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningSection {
    pub k: usize,
    pub n_neg: usize,
    pub provider: Option<Spanned<String>>,
}

impl Default for MiningSection {
    fn default() -> Self {
        let d = MiningConfig::default();
        MiningSection {
            k: d.k,
            n_neg: d.n_neg,
            provider: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub ks: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            ks: crate::evalkit::DEFAULT_KS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderRole {
    Text,
    Token,
    Scorer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderType {
    Stub,
    File,
    Http,
    Oracle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderDecl {
    pub role: ProviderRole,
    #[serde(rename = "type")]
    pub kind: Spanned<ProviderType>,
    pub seed: Option<u64>,
    pub dims: Option<usize>,
    pub path: Option<PathBuf>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub batch_size: Option<usize>,
    pub timeout_secs: Option<u64>,
    pub retries: Option<u32>,
    pub auth_token: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineDecl {
    pub name: Spanned<String>,
    pub retriever: RetrieverKind,
    pub retriever_provider: Spanned<String>,
    #[serde(default)]
    pub reranker: RerankerKind,
    #[serde(default)]
    pub reranker_provider: Option<Spanned<String>>,
    #[serde(default)]
    pub k_retrieve: Option<usize>,
    #[serde(default)]
    pub k_final: Option<usize>,
    #[serde(default)]
    pub retriever_label: Option<String>,
    #[serde(default)]
    pub reranker_label: Option<String>,
}

impl PipelineDecl {
    pub fn to_config(&self) -> PipelineConfig {
        PipelineConfig {
            name: self.name.get_ref().clone(),
            retriever: self.retriever,
            retriever_provider: self.retriever_provider.get_ref().clone(),
            reranker: self.reranker,
            reranker_provider: self.reranker_provider.as_ref().map(|s| s.get_ref().clone()),
            k_retrieve: self.k_retrieve.unwrap_or(DEFAULT_K_RETRIEVE),
            k_final: self.k_final.unwrap_or(DEFAULT_K_FINAL),
            retriever_label: self.retriever_label.clone(),
            reranker_label: self.reranker_label.clone(),
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.display().to_string(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Config, ConfigError> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError {
                path: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.source_path = origin.to_string();
        cfg.source_text = text.to_string();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn error_at(&self, span: std::ops::Range<usize>, message: impl Into<String>) -> ConfigError {
        let (line, column) = line_col(&self.source_text, span.start);
        ConfigError {
            path: self.source_path.clone(),
            line,
            column,
            message: message.into(),
        }
    }

    fn error_top(&self, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: self.source_path.clone(),
            line: 0,
            column: 0,
            message: message.into(),
        }
    }

    /// Cross-field checks: provider references, roles and pipeline shape.
    fn check(&self) -> Result<(), ConfigError> {
        self.chunker.validate().map_err(|e| self.error_top(format!("chunker: {e}")))?;
        let mut names = HashSet::new();
        for p in &self.pipelines {
            if !names.insert(p.name.get_ref().as_str()) {
                return Err(self.error_at(p.name.span(), format!("duplicate pipeline name {:?}", p.name.get_ref())));
            }
            let want = match p.retriever {
                RetrieverKind::Dense => ProviderRole::Text,
                RetrieverKind::LateInteraction => ProviderRole::Token,
            };
            self.check_ref(&p.retriever_provider, want)?;
            match (p.reranker, &p.reranker_provider) {
                (RerankerKind::PairScorer, Some(r)) => self.check_ref(r, ProviderRole::Scorer)?,
                (RerankerKind::LateInteraction, Some(r)) => self.check_ref(r, ProviderRole::Token)?,
                (RerankerKind::None, Some(r)) => {
                    return Err(self.error_at(r.span(), "reranker_provider given but reranker is none"))
                }
                (RerankerKind::None, None) => {}
                (_, None) => return Err(self.error_at(p.name.span(), "reranker needs a reranker_provider")),
            }
            p.to_config()
                .validate()
                .map_err(|e| self.error_at(p.name.span(), e.to_string()))?;
        }
        if let Some(m) = &self.mining.provider {
            if !self.providers.contains_key(m.get_ref()) {
                return Err(self.error_at(m.span(), format!("unknown provider {:?}", m.get_ref())));
            }
        }
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(self.error_top("eval.ks must be non-empty and positive"));
        }
        Ok(())
    }

    fn check_ref(&self, name: &Spanned<String>, role: ProviderRole) -> Result<(), ConfigError> {
        match self.providers.get(name.get_ref()) {
            None => Err(self.error_at(name.span(), format!("unknown provider {:?}", name.get_ref()))),
            Some(p) if p.role != role => Err(self.error_at(
                name.span(),
                format!("provider {:?} has role {:?}, expected {:?}", name.get_ref(), p.role, role),
            )),
            Some(_) => Ok(()),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn pipeline(&self, name: &str) -> Option<PipelineConfig> {
        self.pipelines.iter().find(|p| p.name.get_ref() == name).map(PipelineDecl::to_config)
    }

    pub fn pipeline_configs(&self) -> Vec<PipelineConfig> {
        self.pipelines.iter().map(PipelineDecl::to_config).collect()
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            train_fraction: self.split.train_fraction,
            seed: self.seed,
            stratify_key: self.split.stratify_key.clone(),
        }
    }

    pub fn mining_config(&self) -> MiningConfig {
        MiningConfig {
            k: self.mining.k,
            n_neg: self.mining.n_neg,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
seed = 7

[providers.e5]
role = "text"
type = "stub"
dims = 32

[providers.colbert]
role = "token"
type = "stub"

[[pipelines]]
name = "exp1"
retriever = "dense"
retriever_provider = "e5"
reranker = "late_interaction"
reranker_provider = "colbert"
k_retrieve = 20
k_final = 5
"#;

    #[test]
    fn parses_and_converts() {
        let cfg = Config::parse(GOOD, "c.toml", Path::new("/base")).unwrap();
        let p = cfg.pipeline("exp1").unwrap();
        assert_eq!(p.k_final, 5);
        assert_eq!(p.reranker_provider.as_deref(), Some("colbert"));
        assert_eq!(cfg.resolve(Path::new("x.jsonl")), PathBuf::from("/base/x.jsonl"));
        assert_eq!(cfg.chunker.max_tokens, 512);
        assert_eq!(cfg.eval.ks, vec![1, 3]);
    }

    #[test]
    fn unknown_provider_points_at_reference() {
        let bad = GOOD.replace("reranker_provider = \"colbert\"", "reranker_provider = \"colbret\"");
        let err = Config::parse(&bad, "c.toml", Path::new(".")).unwrap_err();
        assert_eq!(err.line, 18, "{err}");
        assert!(err.to_string().starts_with("c.toml:18:"), "{err}");
        assert!(err.message.contains("colbret"));
    }

    #[test]
    fn wrong_role_is_rejected() {
        let bad = GOOD.replace("retriever_provider = \"e5\"", "retriever_provider = \"colbert\"");
        let err = Config::parse(&bad, "c.toml", Path::new(".")).unwrap_err();
        assert!(err.message.contains("role"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = Config::parse("seed = 7\n[chunker]\nmax_tokens = \"big\"\n", "c.toml", Path::new(".")).unwrap_err();
        assert_eq!(err.line, 3, "{err}");
        let err = Config::parse("sede = 7\n", "c.toml", Path::new(".")).unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn chunker_validation_runs() {
        let err = Config::parse("[chunker]\nmax_tokens = 10\noverlap_tokens = 10\n", "c.toml", Path::new(".")).unwrap_err();
        assert!(err.message.contains("overlap"));
    }
}
