use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "kgen", version, about = "Build commonsense knowledge graphs from text")]
pub struct Cli {
    /// Pipeline configuration file (TOML). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Where to write the main result; standard output when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Extract and match only; skip tail generation.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Report errors on stderr as JSON objects.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline on a text.
    Infer(InferArgs),
    /// Extract candidate heads from a text.
    Heads(HeadsArgs),
    /// Pair heads with relations.
    Match(MatchArgs),
    /// Train the embedding-based relation matcher.
    TrainMatcher(TrainArgs),
    /// Re-split a labelled head pool with bounded word overlap.
    Resplit(ResplitArgs),
    /// Score a knowledge model against a reference graph.
    Eval(EvalArgs),
    /// Keep only tuples relevant to a context.
    Filter(FilterArgs),
}

#[derive(Debug, Args)]
pub struct TextInput {
    #[arg(long, conflicts_with = "input_file")]
    pub text: Option<String>,
    /// Read the text from a file (`-` for standard input).
    #[arg(long)]
    pub input_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatcherArg {
    Base,
    Heuristic,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Stub,
    Api,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterArg {
    Off,
    Embedding,
    External,
}

#[derive(Debug, Args)]
pub struct MatcherOptions {
    #[arg(long, value_enum)]
    pub matcher: Option<MatcherArg>,
    /// Trained matcher file, for `--matcher model`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Word-vector file in text format.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Restrict matching to these relations.
    #[arg(long, value_delimiter = ',')]
    pub relations: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub input: TextInput,
    /// Explicit head; repeat for several. Bypasses extraction.
    #[arg(long = "head")]
    pub heads: Vec<String>,
    #[arg(long)]
    pub extractors: Option<String>,
    #[command(flatten)]
    pub matching: MatcherOptions,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long)]
    pub api_url: Option<String>,
    #[arg(long)]
    pub api_model: Option<String>,
    /// Graph of worked examples used to build few-shot prompts.
    #[arg(long)]
    pub few_shot: Option<PathBuf>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Stop sequence; repeat for several.
    #[arg(long)]
    pub stop: Vec<String>,
    #[arg(long, value_enum)]
    pub filter: Option<FilterArg>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub filter_url: Option<String>,
    /// Drop tuples whose relevance could not be scored.
    #[arg(long)]
    pub fail_closed: bool,
    /// Write filter judgments (jsonl) here.
    #[arg(long)]
    pub judgments: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeadsArgs {
    #[command(flatten)]
    pub input: TextInput,
    /// Comma-separated: sentence, np, vp.
    #[arg(long)]
    pub extractors: Option<String>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// JSON list of heads, either strings or `{"head": ...}` objects.
    #[arg(long)]
    pub heads_file: Option<PathBuf>,
    #[arg(long = "head")]
    pub heads: Vec<String>,
    #[command(flatten)]
    pub matching: MatcherOptions,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled heads (jsonl).
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Labelled heads to score the trained model on.
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ResplitArgs {
    /// Labelled head pool (jsonl).
    #[arg(long, required_unless_present = "graph")]
    pub input: Option<PathBuf>,
    /// Knowledge graph files to pool instead; heads are labelled by the
    /// groups of their relations.
    #[arg(long, conflicts_with = "input")]
    pub graph: Vec<PathBuf>,
    /// Maximum training occurrences of any test non-stopword.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    /// Keep selecting for the remaining groups once one group runs out.
    #[arg(long)]
    pub relaxed_balance: bool,
    #[arg(long)]
    pub out_train: PathBuf,
    #[arg(long)]
    pub out_test: PathBuf,
    /// Print the overlap report.
    #[arg(long)]
    pub report: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "model", value_enum, default_value = "stub")]
    pub backend: BackendArg,
    /// Reference graph; every tuple needs at least one tail.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value = "bleu,rouge_l,meteor,cider")]
    pub metrics: String,
    #[arg(long)]
    pub api_url: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub context: String,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub scorer: Option<FilterArg>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub filter_url: Option<String>,
    #[arg(long)]
    pub fail_closed: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub judgments: Option<PathBuf>,
}
