use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 13;

#[derive(Debug, Parser)]
#[command(name = "summetrics", version, about = "Score summaries and meta-evaluate the metrics against human judgments")]
pub struct Cli {
    /// Worker threads for pair-level scoring (default: all cores).
    #[arg(long, global = true, env = "SUMMETRICS_THREADS")]
    pub threads: Option<usize>,

    /// Seed for every random draw; recorded in each output header.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score system summaries against references.
    Score(ScoreArgs),
    /// Correlate metric scores with human judgments.
    Meta(MetaArgs),
    /// Annotation quality and inter-annotator agreement.
    Agreement(AgreementArgs),
    /// Pick the encoder layer that correlates best with the judgments.
    LayerSweep(LayerSweepArgs),
    /// Merge correlation reports into one metric-by-language table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Comma-separated metrics, e.g. rouge1,rougeL,bertscore.
    #[arg(long)]
    pub metric: String,
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub sys: PathBuf,
    /// Only score records in this language.
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Keep the original casing.
    #[arg(long)]
    pub no_lowercase: bool,
    #[arg(long)]
    pub drop_punctuation: bool,
    /// ROUGE-S/SU skip limit (default: unlimited).
    #[arg(long)]
    pub skip_distance: Option<usize>,

    /// Reference embeddings, needed for bertscore and moverscore.
    #[arg(long)]
    pub ref_emb: Option<PathBuf>,
    /// System summary embeddings.
    #[arg(long)]
    pub sys_emb: Option<PathBuf>,
    /// BERTScore layer (default: last stored layer).
    #[arg(long)]
    pub bert_layer: Option<u16>,
    /// Weight BERTScore tokens by IDF over the references.
    #[arg(long)]
    pub bert_idf: bool,
    /// MoverScore layer (default: last stored layer).
    #[arg(long)]
    pub mover_layer: Option<u16>,
    /// Use uniform MoverScore masses instead of IDF.
    #[arg(long)]
    pub mover_no_idf: bool,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,
    #[arg(long, value_enum, default_value_t = TransformArg::Reciprocal)]
    pub transform: TransformArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    Auto,
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransformArg {
    Reciprocal,
    Negative,
    Exp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SdArg {
    Sample,
    Population,
}

/// Settings shared by every command that reads annotations.
#[derive(Debug, Args)]
pub struct JudgmentArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// A random-pair item passes below this score.
    #[arg(long, default_value_t = 25)]
    pub qc_low: u8,
    /// A repeated item passes above this score.
    #[arg(long, default_value_t = 75)]
    pub qc_high: u8,
    /// Standard deviation used for per-HIT z-scores.
    #[arg(long, value_enum, default_value_t = SdArg::Sample)]
    pub sd: SdArg,
    /// Comma-separated languages to keep (default: all).
    #[arg(long)]
    pub lang: Option<String>,
}

#[derive(Debug, Args)]
pub struct MetaArgs {
    #[command(flatten)]
    pub judgments: JudgmentArgs,
    /// Metric TSV files from `score`; repeat or comma-separate.
    #[arg(long, required = true, value_delimiter = ',')]
    pub scores: Vec<PathBuf>,
    /// Statistics to report: pearson, spearman.
    #[arg(long, default_value = "pearson,spearman")]
    pub corr: String,
    /// combined, pointer_generator, bert, or all.
    #[arg(long, default_value = "combined")]
    pub grouping: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[command(flatten)]
    pub judgments: JudgmentArgs,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LayerSweepArgs {
    #[command(flatten)]
    pub judgments: JudgmentArgs,
    /// Directory holding refs.semb and sys.semb.
    #[arg(long)]
    pub emb_dir: PathBuf,
    /// bertscore or moverscore.
    #[arg(long, default_value = "bertscore")]
    pub metric: String,
    /// focus, coverage, or both.
    #[arg(long, default_value = "both")]
    pub criterion: String,
    /// One layer for all languages and systems instead of one per language.
    #[arg(long)]
    pub universal: bool,
    /// IDF weighting: BERTScore tokens, MoverScore masses.
    #[arg(long)]
    pub idf: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Long-format reports from `meta`; repeat or comma-separate.
    #[arg(long, required = true, value_delimiter = ',')]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "combined")]
    pub grouping: String,
    /// pearson or spearman.
    #[arg(long, default_value = "pearson")]
    pub stat: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
