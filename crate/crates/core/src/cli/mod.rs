//! The `emkit` command line.
//!
//! Every stage of the toolkit is a subcommand wired through one TOML config.
//! Failures print a single JSON line on stderr and map onto exit codes:
//! 2 config, 3 input, 4 provider or transport, 5 internal invariant.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod providers;

pub use error::{CliError, ErrorKind};
pub use providers::build_registry;

#[derive(Debug, Parser)]
#[command(name = "emkit", version, about = "Enterprise semantic-search toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Config file; falls back to $EMKIT_CONFIG.
    #[arg(long, global = true, env = "EMKIT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, or output directory for stages that write several files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract and clean raw files (a directory) or a documents JSONL.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Mask PII in a documents JSONL.
    Mask {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Name list, one per line (overrides `mask.dictionary`).
        #[arg(long)]
        dictionary: Option<PathBuf>,
        /// Also write the masked spans as JSONL.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Split documents into token-budgeted chunks.
    Chunk {
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Token-count histogram of a chunks JSONL as TSV.
    Histogram {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        bin_width: usize,
    },
    /// Entity pre-annotation, annotator batches and unanimous merge.
    #[command(subcommand)]
    Annotate(AnnotateCommand),
    /// Question generation.
    #[command(subcommand)]
    Qgen(QgenCommand),
    /// Stratified train/validation split of question-chunk pairs.
    Split {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        chunks: Option<PathBuf>,
        /// Documents JSONL supplying stratum metadata.
        #[arg(long)]
        docs: Option<PathBuf>,
    },
    /// Hard-negative mining for training pairs.
    Mine {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        chunks: Option<PathBuf>,
        /// Retrieval provider (overrides `mining.provider`).
        #[arg(long)]
        provider: Option<String>,
    },
    /// Export mined records as a fine-tuning set plus manifest.json.
    ExportTrain {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        chunks: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: PresetArg,
        /// Overrides the preset's record shape.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Build or query a persisted index.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Run one configured pipeline for a single query.
    Search {
        #[arg(long)]
        query: String,
        #[arg(long)]
        pipeline: String,
        #[arg(short = 'k')]
        k: Option<usize>,
        #[arg(long)]
        chunks: Option<PathBuf>,
    },
    /// Score a run file or a configured pipeline against the benchmark.
    Evaluate {
        #[arg(long, conflicts_with = "pipeline", required_unless_present = "pipeline")]
        run: Option<PathBuf>,
        #[arg(long)]
        pipeline: Option<String>,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        qrels: Option<PathBuf>,
        #[arg(long)]
        chunks: Option<PathBuf>,
        /// With --pipeline, also write the run in TREC format.
        #[arg(long)]
        write_run: Option<PathBuf>,
    },
    /// Run every configured pipeline and write report.md and report.json.
    Matrix {
        #[arg(long)]
        chunks: Option<PathBuf>,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        qrels: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnnotateCommand {
    /// Dictionary pre-annotation of every chunk.
    Pre {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// CSV with `surface,entity_type` (overrides `annotate.dictionary`).
        #[arg(long)]
        dictionary: Option<PathBuf>,
        #[arg(long)]
        case_insensitive: bool,
    },
    /// Group chunks into annotator batches.
    Batch {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Comma-separated annotator ids.
        #[arg(long, value_delimiter = ',')]
        annotators: Option<Vec<String>>,
    },
    /// Keep mentions all three annotators produced identically.
    Merge {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        c: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum QgenCommand {
    /// Print the prompt for one chunk.
    Render {
        #[arg(long)]
        chunks: Option<PathBuf>,
        #[arg(long)]
        chunk_id: String,
        /// Built-in template name or template file.
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, requires = "entity_type")]
        entity: Option<String>,
        #[arg(long, requires = "entity")]
        entity_type: Option<String>,
    },
    /// Generate candidate questions for every chunk (or every mention).
    Generate {
        #[arg(long)]
        chunks: Option<PathBuf>,
        /// Entity mentions JSONL; switches to the entity template.
        #[arg(long)]
        mentions: Option<PathBuf>,
        #[arg(long)]
        template: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Filter candidates and write pairs.jsonl, queries.jsonl and qrels.tsv.
    Curate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        chunks: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Embed every chunk with a provider and save the index.
    Build {
        #[arg(long)]
        provider: String,
        #[arg(long)]
        chunks: Option<PathBuf>,
    },
    /// Query a saved index.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        provider: String,
        #[arg(long)]
        query: String,
        #[arg(short = 'k', default_value_t = 10)]
        k: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    BiEncoder,
    CrossEncoder,
    Colbert,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Pair,
    Triplet,
    MultiNegative,
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    commands::dispatch(&cli.global, cli.command)
}
