use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::providers::{build_registry, needs_benchmark};
use super::{AnnotateCommand, CliError, Command, FormatArg, GlobalArgs, IndexCommand, PresetArg, QgenCommand};
use crate::annotate::{self, EntityMention};
use crate::config::{Config, GenerationBackend, ProviderRole};
use crate::corpus::{
    chunk_histogram, chunk_text, clean_text, denormalize_records, extract_text, write_histogram_tsv, Chunk, Document,
    MaskSpan, PiiMasker, Source, StructuredRecord,
};
use crate::evalkit::{evaluate_run, run_experiment_matrix};
use crate::http::HttpSettings;
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::qagen::{
    build_pairs, curate, generate, load_benchmark, render_prompt, split_dataset, write_qrels_tsv, Benchmark,
    CandidateQuestion, GenerationParams, HttpGenerator, PromptTemplate, QAPair, Query, StubGenerator, TextGenerator,
};
use crate::retrieval::{
    build_dense_index, build_late_index, dense_search, export_training_manifest, late_interaction_search,
    mine_hard_negatives, read_trec_run, shape_records, write_trec_run, ChunkStore, DenseIndex, HyperparamPreset,
    LateInteractionIndex, Pipeline, PipelineConfig, RankedList, RerankerKind, RetrievalError, TrainingFormat, TrainingRecord,
};
use crate::seed::derive_u64;

struct Ctx<'a> {
    cfg: Config,
    global: &'a GlobalArgs,
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

impl<'a> Ctx<'a> {
    fn load(global: &'a GlobalArgs) -> Result<Self, CliError> {
        let mut cfg = match &global.config {
            Some(path) => Config::load(path)?,
            None => Config {
                base_dir: PathBuf::from("."),
                source_path: "<defaults>".into(),
                ..Config::default()
            },
        };
        if let Some(seed) = global.seed {
            cfg.seed = seed;
        }
        Ok(Ctx { cfg, global })
    }

    /// A flag path as given, else a config path resolved against the config
    /// file, else a config error naming both.
    fn input(&self, flag: Option<&PathBuf>, configured: Option<&PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        flag.cloned()
            .or_else(|| configured.map(|p| self.cfg.resolve(p)))
            .ok_or_else(|| CliError::config(format!("no {what} given; pass a flag or set it in the config")))
    }

    fn out_dir(&self) -> Result<PathBuf, CliError> {
        self.global
            .out
            .clone()
            .or_else(|| self.cfg.out_dir.as_ref().map(|p| self.cfg.resolve(p)))
            .ok_or_else(|| CliError::config("no output location; pass --out or set out_dir"))
    }

    fn out_file(&self, default_name: &str) -> Result<PathBuf, CliError> {
        match &self.global.out {
            Some(p) => Ok(p.clone()),
            None => Ok(self.out_dir()?.join(default_name)),
        }
    }

    fn chunks_path(&self, flag: Option<&PathBuf>) -> Result<PathBuf, CliError> {
        self.input(flag, self.cfg.corpus.chunks.as_ref(), "chunks file")
    }

    fn load_chunks(&self, flag: Option<&PathBuf>) -> Result<Vec<Chunk>, CliError> {
        Ok(read_jsonl(&self.chunks_path(flag)?)?)
    }

    fn load_store(&self, flag: Option<&PathBuf>) -> Result<Arc<ChunkStore>, CliError> {
        Ok(Arc::new(ChunkStore::new(self.load_chunks(flag)?)?))
    }

    fn load_bench(
        &self,
        queries: Option<&PathBuf>,
        qrels: Option<&PathBuf>,
        store: &ChunkStore,
    ) -> Result<Benchmark, CliError> {
        let q = self.input(queries, self.cfg.benchmark.queries.as_ref(), "queries file")?;
        let r = self.input(qrels, self.cfg.benchmark.qrels.as_ref(), "qrels file")?;
        let known: HashSet<String> = store.chunks().iter().map(|c| c.id.clone()).collect();
        Ok(load_benchmark(&q, &r, Some(&known))?)
    }

    /// Builds a pipeline over `store` with the named providers.
    fn pipeline(
        &self,
        store: Arc<ChunkStore>,
        providers: &[&str],
        bench: Option<&Benchmark>,
    ) -> Result<Pipeline, CliError> {
        let owned;
        let bench = match bench {
            Some(b) => Some(b),
            None if needs_benchmark(&self.cfg, providers) => {
                owned = self.load_bench(None, None, &store)?;
                Some(&owned)
            }
            None => None,
        };
        let registry = build_registry(&self.cfg, store.chunks(), bench, Some(providers))?;
        Ok(Pipeline::new(store, registry))
    }

    fn template(&self, flag: Option<&str>, configured: &str) -> Result<PromptTemplate, CliError> {
        let (name, from_flag) = match flag {
            Some(n) => (n, true),
            None => (configured, false),
        };
        if let Some(t) = PromptTemplate::builtin(name) {
            return Ok(t);
        }
        let path = if from_flag {
            PathBuf::from(name)
        } else {
            self.cfg.resolve(Path::new(name))
        };
        if !path.exists() {
            return Err(CliError::config(format!(
                "template {name:?} is neither built in (generic, generic_n, entity) nor a file"
            )));
        }
        Ok(PromptTemplate::from_file(&path)?)
    }
}

pub(super) fn dispatch(global: &GlobalArgs, command: Command) -> Result<(), CliError> {
    let ctx = Ctx::load(global)?;
    match command {
        Command::Ingest { input } => ingest(&ctx, &input),
        Command::Mask {
            input,
            dictionary,
            report,
        } => mask(&ctx, input.as_ref(), dictionary.as_ref(), report.as_ref()),
        Command::Chunk { input } => chunk(&ctx, input.as_ref()),
        Command::Histogram { input, bin_width } => histogram(&ctx, input.as_ref(), bin_width),
        Command::Annotate(cmd) => annotate_cmd(&ctx, cmd),
        Command::Qgen(cmd) => qgen_cmd(&ctx, cmd),
        Command::Split { pairs, chunks, docs } => split(&ctx, &pairs, chunks.as_ref(), docs.as_ref()),
        Command::Mine {
            pairs,
            chunks,
            provider,
        } => mine(&ctx, &pairs, chunks.as_ref(), provider),
        Command::ExportTrain {
            input,
            chunks,
            preset,
            format,
        } => export_train(&ctx, &input, chunks.as_ref(), preset, format),
        Command::Index(cmd) => index_cmd(&ctx, cmd),
        Command::Search {
            query,
            pipeline,
            k,
            chunks,
        } => search(&ctx, &query, &pipeline, k, chunks.as_ref()),
        Command::Evaluate {
            run,
            pipeline,
            queries,
            qrels,
            chunks,
            write_run,
        } => evaluate(
            &ctx,
            run.as_ref(),
            pipeline.as_deref(),
            queries.as_ref(),
            qrels.as_ref(),
            chunks.as_ref(),
            write_run.as_ref(),
        ),
        Command::Matrix { chunks, queries, qrels } => matrix(&ctx, chunks.as_ref(), queries.as_ref(), qrels.as_ref()),
    }
}

fn source_for(path: &Path) -> Option<Source> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    Some(match ext.as_str() {
        "txt" | "text" => Source::PlainText,
        "html" | "htm" => Source::Html,
        "md" | "markdown" => Source::Markdown,
        "json" => Source::StructuredRecords,
        _ => return None,
    })
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| io_error(dir, e)))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn clean_record(doc: &mut Document) -> Result<(), CliError> {
    let Some(fields) = doc.fields.as_mut() else {
        return Ok(());
    };
    for (_, v) in fields.iter_mut() {
        *v = clean_text(v);
    }
    let rec = doc.record().expect("fields present");
    rec.validate()
        .map_err(|e| CliError::input(format!("document {}: {e}", doc.id)))?;
    doc.text = rec.render();
    Ok(())
}

fn ingest(ctx: &Ctx, input: &Path) -> Result<(), CliError> {
    let mut docs: Vec<Document> = Vec::new();
    if input.is_dir() {
        let mut files = Vec::new();
        walk(input, &mut files)?;
        for path in files {
            let Some(source) = source_for(&path) else {
                tracing::warn!(path = %path.display(), "skipping file with unknown extension");
                continue;
            };
            let rel = path.strip_prefix(input).unwrap_or(&path).with_extension("");
            let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            let raw = fs::read(&path).map_err(|e| io_error(&path, e))?;
            let mut doc = if source == Source::StructuredRecords {
                let rec: StructuredRecord = serde_json::from_slice(&raw)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                let mut d = Document::new(id, source, String::new());
                d.fields = Some(rec.fields);
                d.key_fields = Some(rec.key_fields);
                d
            } else {
                Document::new(id, source, clean_text(&extract_text(&raw, source)))
            };
            doc.metadata.insert("path".into(), rel.display().to_string());
            clean_record(&mut doc)?;
            docs.push(doc);
        }
    } else {
        for mut doc in read_jsonl::<Document>(input)? {
            if doc.fields.is_some() {
                clean_record(&mut doc)?;
            } else {
                doc.text = clean_text(&extract_text(doc.text.as_bytes(), doc.source));
            }
            docs.push(doc);
        }
    }
    docs.retain(|d| {
        let keep = !d.text.trim().is_empty();
        if !keep {
            tracing::warn!(doc = %d.id, "dropping document with no text");
        }
        keep
    });
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = docs.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(CliError::input(format!("duplicate document id {}", w[0].id)));
    }
    write_jsonl(&ctx.out_file("docs.jsonl")?, &docs)?;
    Ok(())
}

fn read_names(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[derive(Serialize)]
struct SpanLine<'a> {
    doc_id: &'a str,
    #[serde(flatten)]
    span: &'a MaskSpan,
}

/// Masks the text, or each field value of a structured document. Spans are
/// offsets into the resulting `text`.
fn mask_document(masker: &PiiMasker, doc: &Document) -> (Document, Vec<MaskSpan>) {
    let mut out = doc.clone();
    let Some(fields) = doc.fields.as_ref() else {
        let (text, spans) = masker.mask(&doc.text);
        out.text = text;
        return (out, spans);
    };
    let mut spans = Vec::new();
    let mut masked_fields = Vec::with_capacity(fields.len());
    let mut offset = 0;
    for (k, v) in fields {
        let (mv, s) = masker.mask(v);
        let value_start = offset + StructuredRecord::render_line(k, "").len();
        spans.extend(s.into_iter().map(|m| MaskSpan {
            start: m.start + value_start,
            end: m.end + value_start,
            kind: m.kind,
        }));
        offset += StructuredRecord::render_line(k, &mv).len() + 1;
        masked_fields.push((k.clone(), mv));
    }
    out.fields = Some(masked_fields);
    out.text = out.record().expect("fields present").render();
    (out, spans)
}

fn mask(ctx: &Ctx, input: Option<&PathBuf>, dictionary: Option<&PathBuf>, report: Option<&PathBuf>) -> Result<(), CliError> {
    let docs: Vec<Document> = read_jsonl(&ctx.input(input, ctx.cfg.corpus.documents.as_ref(), "documents file")?)?;
    let names = match dictionary
        .cloned()
        .or_else(|| ctx.cfg.mask.dictionary.as_ref().map(|p| ctx.cfg.resolve(p)))
    {
        Some(p) => read_names(&p)?,
        None => Vec::new(),
    };
    let masker = PiiMasker::new().with_dictionary(&names);
    let results: Vec<(Document, Vec<MaskSpan>)> = docs.par_iter().map(|d| mask_document(&masker, d)).collect();
    for ((masked, _), original) in results.iter().zip(&docs) {
        if masked.text.len() != original.text.len() {
            return Err(CliError::invariant(format!("masking changed the length of {}", original.id)));
        }
    }
    let out_docs: Vec<&Document> = results.iter().map(|(d, _)| d).collect();
    write_jsonl(&ctx.out_file("masked.jsonl")?, out_docs)?;
    if let Some(report) = report {
        let lines: Vec<SpanLine> = results
            .iter()
            .flat_map(|(d, spans)| spans.iter().map(move |span| SpanLine { doc_id: &d.id, span }))
            .collect();
        write_jsonl(report, &lines)?;
    }
    Ok(())
}

fn chunk(ctx: &Ctx, input: Option<&PathBuf>) -> Result<(), CliError> {
    let docs: Vec<Document> = read_jsonl(&ctx.input(input, ctx.cfg.corpus.documents.as_ref(), "documents file")?)?;
    let chunker = &ctx.cfg.chunker;
    let per_doc: Vec<Vec<Chunk>> = docs
        .par_iter()
        .map(|d| match d.record() {
            Some(rec) => denormalize_records(&d.id, &rec, chunker),
            None => chunk_text(&d.id, &d.text, chunker),
        })
        .collect::<Result<_, _>>()?;
    let chunks: Vec<Chunk> = per_doc.into_iter().flatten().collect();
    let out = match (&ctx.global.out, &ctx.cfg.corpus.chunks) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => ctx.cfg.resolve(p),
        (None, None) => ctx.out_file("chunks.jsonl")?,
    };
    write_jsonl(&out, &chunks)?;
    Ok(())
}

fn histogram(ctx: &Ctx, input: Option<&PathBuf>, bin_width: usize) -> Result<(), CliError> {
    if bin_width == 0 {
        return Err(CliError::config("--bin-width must be at least 1"));
    }
    let chunks = ctx.load_chunks(input)?;
    let bins = chunk_histogram(&chunks, bin_width);
    let mut buf = Vec::new();
    write_histogram_tsv(&mut buf, &bins).expect("write to vec");
    emit(ctx, &buf)
}

/// Writes to `--out` when given, else stdout.
fn emit(ctx: &Ctx, bytes: &[u8]) -> Result<(), CliError> {
    match &ctx.global.out {
        Some(p) => write_file(p, bytes),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::input(format!("stdout: {e}"))),
    }
}

fn annotate_cmd(ctx: &Ctx, cmd: AnnotateCommand) -> Result<(), CliError> {
    let cfg = &ctx.cfg.annotate;
    match cmd {
        AnnotateCommand::Pre {
            input,
            dictionary,
            case_insensitive,
        } => {
            let chunks = ctx.load_chunks(input.as_ref())?;
            let dict_path = ctx.input(dictionary.as_ref(), cfg.dictionary.as_ref(), "entity dictionary")?;
            let dict = annotate::load_dictionary(&dict_path)?;
            let ci = case_insensitive || cfg.case_insensitive;
            let per_chunk: Vec<Vec<EntityMention>> = chunks
                .par_iter()
                .map(|c| annotate::pre_annotate(c, &dict, ci))
                .collect::<Result<_, _>>()?;
            let mentions: Vec<EntityMention> = per_chunk.into_iter().flatten().collect();
            write_jsonl(&ctx.out_file("mentions.jsonl")?, &mentions)?;
        }
        AnnotateCommand::Batch {
            input,
            batch_size,
            annotators,
        } => {
            let ids: Vec<String> = ctx.load_chunks(input.as_ref())?.into_iter().map(|c| c.id).collect();
            let pool = annotators.unwrap_or_else(|| cfg.annotators.clone());
            let batches = annotate::make_batches(&ids, batch_size.unwrap_or(cfg.batch_size), &pool)?;
            write_jsonl(&ctx.out_file("batches.jsonl")?, &batches)?;
        }
        AnnotateCommand::Merge { a, b, c } => {
            let a: Vec<EntityMention> = read_jsonl(&a)?;
            let b: Vec<EntityMention> = read_jsonl(&b)?;
            let c: Vec<EntityMention> = read_jsonl(&c)?;
            let merged = annotate::merge_unanimous(&a, &b, &c);
            write_jsonl(&ctx.out_file("merged.jsonl")?, &merged)?;
        }
    }
    Ok(())
}

fn generator(ctx: &Ctx, n: usize) -> Result<Box<dyn TextGenerator>, CliError> {
    let g = &ctx.cfg.generation;
    Ok(match g.backend {
        GenerationBackend::Stub => Box::new(StubGenerator {
            seed: ctx.cfg.seed,
            default_n: n,
        }),
        GenerationBackend::Http => {
            let url = g
                .base_url
                .as_deref()
                .ok_or_else(|| CliError::config("generation.base_url is required for the http backend"))?;
            let settings = HttpSettings {
                timeout: std::time::Duration::from_secs(g.timeout_secs),
                retries: g.retries,
                auth_token: g.auth_token.clone(),
                ..HttpSettings::default()
            };
            Box::new(HttpGenerator::new(url, settings))
        }
    })
}

fn qgen_cmd(ctx: &Ctx, cmd: QgenCommand) -> Result<(), CliError> {
    let g = &ctx.cfg.generation;
    match cmd {
        QgenCommand::Render {
            chunks,
            chunk_id,
            template,
            n,
            entity,
            entity_type,
        } => {
            let chunks = ctx.load_chunks(chunks.as_ref())?;
            let chunk = chunks
                .iter()
                .find(|c| c.id == chunk_id)
                .ok_or_else(|| CliError::input(format!("unknown chunk id {chunk_id}")))?;
            let mention = entity.map(|surface| EntityMention {
                chunk_id: chunk.id.clone(),
                start: 0,
                end: 0,
                surface,
                entity_type: entity_type.unwrap_or_default(),
                annotator: annotate::AUTO_ANNOTATOR.into(),
            });
            let default = if mention.is_some() { &g.entity_template } else { &g.template };
            let tpl = ctx.template(template.as_deref(), default)?;
            let mut prompt = render_prompt(&tpl, chunk, mention.as_ref(), n.unwrap_or(g.n))?;
            prompt.push('\n');
            emit(ctx, prompt.as_bytes())
        }
        QgenCommand::Generate {
            chunks,
            mentions,
            template,
            n,
        } => {
            let chunks = ctx.load_chunks(chunks.as_ref())?;
            let n = n.unwrap_or(g.n);
            let by_id: BTreeMap<&str, &Chunk> = chunks.iter().map(|c| (c.id.as_str(), c)).collect();
            let mut work: Vec<(&Chunk, Option<EntityMention>)> = Vec::new();
            let tpl = match &mentions {
                Some(path) => {
                    let mut seen = HashSet::new();
                    for m in read_jsonl::<EntityMention>(path)? {
                        let c = by_id
                            .get(m.chunk_id.as_str())
                            .ok_or_else(|| CliError::input(format!("mention refers to unknown chunk {}", m.chunk_id)))?;
                        if seen.insert((m.chunk_id.clone(), m.surface.clone(), m.entity_type.clone())) {
                            work.push((c, Some(m)));
                        }
                    }
                    ctx.template(template.as_deref(), &g.entity_template)?
                }
                None => {
                    work.extend(chunks.iter().map(|c| (c, None)));
                    ctx.template(template.as_deref(), &g.template)?
                }
            };
            let client = generator(ctx, n)?;
            let run = || -> Result<Vec<Vec<CandidateQuestion>>, CliError> {
                work.par_iter()
                    .map(|(chunk, mention)| {
                        let surface = mention.as_ref().map_or("", |m| m.surface.as_str());
                        let params = GenerationParams {
                            max_tokens: g.max_tokens,
                            temperature: g.temperature,
                            seed: derive_u64(ctx.cfg.seed, &[b"qgen", chunk.id.as_bytes(), surface.as_bytes()]),
                        };
                        let out = generate(chunk, client.as_ref(), &tpl, mention.as_ref(), n, g.iteration, params)?;
                        if let Some(d) = &out.diagnostic {
                            tracing::warn!(chunk = %chunk.id, diagnostic = %d, "no questions parsed");
                        }
                        Ok(out.questions)
                    })
                    .collect()
            };
            // bounded in-flight requests for remote generation
            let per_item = match g.backend {
                GenerationBackend::Http => rayon::ThreadPoolBuilder::new()
                    .num_threads(g.max_in_flight.max(1))
                    .build()
                    .map_err(|e| CliError::config(e.to_string()))?
                    .install(run)?,
                GenerationBackend::Stub => run()?,
            };
            let candidates: Vec<CandidateQuestion> = per_item.into_iter().flatten().collect();
            write_jsonl(&ctx.out_file("candidates.jsonl")?, &candidates)?;
            Ok(())
        }
        QgenCommand::Curate { input, chunks } => {
            let chunks = ctx.load_chunks(chunks.as_ref())?;
            let candidates: Vec<CandidateQuestion> = read_jsonl(&input)?;
            let mut grouped: BTreeMap<&str, Vec<CandidateQuestion>> = BTreeMap::new();
            for c in &candidates {
                grouped.entry(c.chunk_id.as_str()).or_default().push(c.clone());
            }
            let known: HashSet<String> = chunks.iter().map(|c| c.id.clone()).collect();
            if let Some(unknown) = grouped.keys().find(|k| !known.contains(**k)) {
                return Err(CliError::input(format!("candidate refers to unknown chunk {unknown}")));
            }
            let mut kept = Vec::new();
            for chunk in &chunks {
                if let Some(cands) = grouped.get(chunk.id.as_str()) {
                    kept.extend(curate(cands, chunk, &ctx.cfg.curation));
                }
            }
            let (pairs, queries) = build_pairs(&kept);
            tracing::info!(candidates = candidates.len(), kept = pairs.len(), "curated");
            let dir = ctx.out_dir()?;
            write_jsonl(&dir.join("pairs.jsonl"), &pairs)?;
            write_jsonl(&dir.join("queries.jsonl"), &queries)?;
            write_qrels_tsv(&dir.join("qrels.tsv"), &pairs, &known)?;
            Ok(())
        }
    }
}

fn split(ctx: &Ctx, pairs: &Path, chunks: Option<&PathBuf>, docs: Option<&PathBuf>) -> Result<(), CliError> {
    let pairs: Vec<QAPair> = read_jsonl(pairs)?;
    let chunks = ctx.load_chunks(chunks)?;
    let docs: Vec<Document> = read_jsonl(&ctx.input(docs, ctx.cfg.corpus.documents.as_ref(), "documents file")?)?;
    let doc_meta: BTreeMap<&str, BTreeMap<String, String>> = docs
        .iter()
        .map(|d| {
            let mut m = d.metadata.clone();
            m.entry("source".into()).or_insert_with(|| d.source.as_str().to_string());
            (d.id.as_str(), m)
        })
        .collect();
    let chunk_meta: BTreeMap<String, BTreeMap<String, String>> = chunks
        .iter()
        .filter_map(|c| doc_meta.get(c.doc_id.as_str()).map(|m| (c.id.clone(), m.clone())))
        .collect();
    let (train, validation) = split_dataset(&pairs, &chunk_meta, &ctx.cfg.split_config())?;
    let dir = ctx.out_dir()?;
    write_jsonl(&dir.join("train.jsonl"), &train)?;
    write_jsonl(&dir.join("validation.jsonl"), &validation)?;
    let queries: Vec<Query> = validation
        .iter()
        .map(|p| Query {
            query_id: p.query_id.clone(),
            question: p.question.clone(),
            q_type: None,
            chunk_id_hint: Some(p.chunk_id.clone()),
        })
        .collect();
    write_jsonl(&dir.join("validation_queries.jsonl"), &queries)?;
    let known: HashSet<String> = chunks.iter().map(|c| c.id.clone()).collect();
    write_qrels_tsv(&dir.join("validation_qrels.tsv"), &validation, &known)?;
    Ok(())
}

/// Either index kind, chosen by the provider's role.
enum AnyIndex {
    Dense(Arc<DenseIndex>),
    Late(Arc<LateInteractionIndex>),
}

fn provider_role(ctx: &Ctx, name: &str) -> Result<ProviderRole, CliError> {
    ctx.cfg
        .providers
        .get(name)
        .map(|p| p.role)
        .ok_or_else(|| CliError::config(format!("unknown provider {name:?}")))
}

fn search_index(
    pipeline: &Pipeline,
    index: &AnyIndex,
    provider: &str,
    query_id: &str,
    query: &str,
    k: usize,
) -> Result<RankedList, RetrievalError> {
    let reg = pipeline.registry();
    Ok(match index {
        AnyIndex::Dense(idx) => dense_search(idx, query_id, query, reg.text(provider)?.as_ref(), k, provider)?,
        AnyIndex::Late(idx) => late_interaction_search(idx, query_id, query, reg.token(provider)?.as_ref(), k, provider)?,
    })
}

fn mine(ctx: &Ctx, pairs: &Path, chunks: Option<&PathBuf>, provider: Option<String>) -> Result<(), CliError> {
    let pairs: Vec<QAPair> = read_jsonl(pairs)?;
    let store = ctx.load_store(chunks)?;
    let provider = provider
        .or_else(|| ctx.cfg.mining.provider.as_ref().map(|p| p.get_ref().clone()))
        .ok_or_else(|| CliError::config("no mining provider; pass --provider or set mining.provider"))?;
    let role = provider_role(ctx, &provider)?;
    let pipeline = ctx.pipeline(store.clone(), &[&provider], None)?;
    let index = match role {
        ProviderRole::Text => AnyIndex::Dense(pipeline.dense_index(&provider)?),
        ProviderRole::Token => AnyIndex::Late(pipeline.late_index(&provider)?),
        ProviderRole::Scorer => return Err(CliError::config("mining needs a text or token provider, not a scorer")),
    };
    let records = mine_hard_negatives(
        &pairs,
        &store,
        |p, k| search_index(&pipeline, &index, &provider, &p.query_id, &p.question, k),
        &ctx.cfg.mining_config(),
    )?;
    for r in &records {
        if r.negative_ids.contains(&r.positive_id) {
            return Err(CliError::invariant(format!("query {} lists its positive as a negative", r.query_id)));
        }
    }
    write_jsonl(&ctx.out_file("negatives.jsonl")?, &records)?;
    Ok(())
}

fn export_train(
    ctx: &Ctx,
    input: &Path,
    chunks: Option<&PathBuf>,
    preset: PresetArg,
    format: Option<FormatArg>,
) -> Result<(), CliError> {
    let records: Vec<TrainingRecord> = read_jsonl(input)?;
    let store = ctx.load_store(chunks)?;
    let preset = match preset {
        PresetArg::BiEncoder => HyperparamPreset::BiEncoder,
        PresetArg::CrossEncoder => HyperparamPreset::CrossEncoder,
        PresetArg::Colbert => HyperparamPreset::Colbert,
    };
    let format = match format {
        Some(FormatArg::Pair) => TrainingFormat::Pair,
        Some(FormatArg::Triplet) => TrainingFormat::Triplet,
        Some(FormatArg::MultiNegative) => TrainingFormat::MultiNegative,
        None => preset.format(),
    };
    let shaped = shape_records(&records, format);
    export_training_manifest(&shaped, format, preset.hyperparams(), &ctx.out_file("train.jsonl")?, &store)?;
    Ok(())
}

fn format_ranked(list: &RankedList) -> String {
    list.entries
        .iter()
        .enumerate()
        .map(|(i, e)| format!("{}\t{}\t{:.6}\n", i + 1, e.chunk_id, e.score))
        .collect()
}

fn index_cmd(ctx: &Ctx, cmd: IndexCommand) -> Result<(), CliError> {
    match cmd {
        IndexCommand::Build { provider, chunks } => {
            let store = ctx.load_store(chunks.as_ref())?;
            let role = provider_role(ctx, &provider)?;
            let pipeline = ctx.pipeline(store.clone(), &[&provider], None)?;
            let out = ctx.out_file(&format!("{provider}.index"))?;
            match role {
                ProviderRole::Text => {
                    build_dense_index(store.chunks(), pipeline.registry().text(&provider)?.as_ref())?.save(&out)?
                }
                ProviderRole::Token => {
                    build_late_index(store.chunks(), pipeline.registry().token(&provider)?.as_ref())?.save(&out)?
                }
                ProviderRole::Scorer => return Err(CliError::config("scorers do not build indexes")),
            }
            Ok(())
        }
        IndexCommand::Search {
            index,
            provider,
            query,
            k,
        } => {
            let role = provider_role(ctx, &provider)?;
            let idx = match role {
                ProviderRole::Text => AnyIndex::Dense(Arc::new(DenseIndex::load(&index)?)),
                ProviderRole::Token => AnyIndex::Late(Arc::new(LateInteractionIndex::load(&index)?)),
                ProviderRole::Scorer => return Err(CliError::config("scorers do not build indexes")),
            };
            // the saved index holds no chunk texts; oracle providers need the corpus
            let store = match ctx.cfg.corpus.chunks.as_ref() {
                Some(_) if needs_benchmark(&ctx.cfg, &[&provider]) => ctx.load_store(None)?,
                _ => Arc::new(ChunkStore::default()),
            };
            let pipeline = ctx.pipeline(store, &[&provider], None)?;
            let list = search_index(&pipeline, &idx, &provider, "query", &query, k)?;
            emit(ctx, format_ranked(&list).as_bytes())
        }
    }
}

fn pipeline_providers(cfg: &PipelineConfig) -> Vec<&str> {
    let mut names = vec![cfg.retriever_provider.as_str()];
    if cfg.reranker != RerankerKind::None {
        names.extend(cfg.reranker_provider.as_deref());
    }
    names
}

fn search(ctx: &Ctx, query: &str, pipeline: &str, k: Option<usize>, chunks: Option<&PathBuf>) -> Result<(), CliError> {
    let mut pcfg = ctx
        .cfg
        .pipeline(pipeline)
        .ok_or_else(|| CliError::config(format!("unknown pipeline {pipeline:?}")))?;
    if let Some(k) = k {
        pcfg.k_final = k;
        pcfg.k_retrieve = pcfg.k_retrieve.max(k);
    }
    let store = ctx.load_store(chunks)?;
    let p = ctx.pipeline(store, &pipeline_providers(&pcfg), None)?;
    let list = p.run(&pcfg, "query", query)?;
    emit(ctx, format_ranked(&list).as_bytes())
}

fn evaluate(
    ctx: &Ctx,
    run: Option<&PathBuf>,
    pipeline: Option<&str>,
    queries: Option<&PathBuf>,
    qrels: Option<&PathBuf>,
    chunks: Option<&PathBuf>,
    write_run: Option<&PathBuf>,
) -> Result<(), CliError> {
    let ks = &ctx.cfg.eval.ks;
    let table = match (run, pipeline) {
        (Some(run), _) => {
            let qrels_path = ctx.input(qrels, ctx.cfg.benchmark.qrels.as_ref(), "qrels file")?;
            let judged = crate::qagen::load_qrels_tsv(&qrels_path)?;
            evaluate_run(&read_trec_run(run)?, &judged, ks)?
        }
        (None, Some(name)) => {
            let pcfg = ctx
                .cfg
                .pipeline(name)
                .ok_or_else(|| CliError::config(format!("unknown pipeline {name:?}")))?;
            let store = ctx.load_store(chunks)?;
            let bench = ctx.load_bench(queries, qrels, &store)?;
            let p = ctx.pipeline(store, &pipeline_providers(&pcfg), Some(&bench))?;
            let pairs: Vec<(String, String)> = bench
                .queries
                .iter()
                .map(|q| (q.query_id.clone(), q.question.clone()))
                .collect();
            let runs = p.run_all(&pcfg, &pairs)?;
            if let Some(path) = write_run {
                write_trec_run(path, &runs, name)?;
            }
            evaluate_run(&runs, &bench.qrels, ks)?
        }
        (None, None) => return Err(CliError::config("pass --run or --pipeline")),
    };
    let json = serde_json::to_string_pretty(&table).expect("metric table serializes") + "\n";
    emit(ctx, json.as_bytes())
}

/// Digest of the config text and the effective seed.
fn config_hash(cfg: &Config) -> String {
    let mut h = Sha256::new();
    h.update(cfg.source_text.as_bytes());
    h.update(format!("\nseed={}", cfg.seed).as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn matrix(ctx: &Ctx, chunks: Option<&PathBuf>, queries: Option<&PathBuf>, qrels: Option<&PathBuf>) -> Result<(), CliError> {
    let configs = ctx.cfg.pipeline_configs();
    if configs.is_empty() {
        return Err(CliError::config("no [[pipelines]] declared"));
    }
    let store = ctx.load_store(chunks)?;
    let bench = ctx.load_bench(queries, qrels, &store)?;
    let names: Vec<&str> = configs.iter().flat_map(pipeline_providers).collect();
    let p = ctx.pipeline(store, &names, Some(&bench))?;
    let report = run_experiment_matrix(&configs, &p, &bench.queries, &bench.qrels, &ctx.cfg.eval.ks, &config_hash(&ctx.cfg));
    let dir = ctx.out_dir()?;
    write_file(&dir.join("report.md"), report.to_markdown().as_bytes())?;
    write_file(&dir.join("report.json"), report.to_json().as_bytes())?;
    if !report.complete {
        let failed: Vec<String> = report
            .rows
            .iter()
            .filter(|r| r.error.is_some())
            .map(|r| r.pipeline.clone())
            .collect();
        return Err(CliError::new(
            super::ErrorKind::Provider,
            format!("partial report; failed pipelines: {}", failed.join(", ")),
        ));
    }
    Ok(())
}
