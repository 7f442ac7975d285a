use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cote",
    version,
    about = "Chain-of-thought explanation data for dialogue state tracking"
)]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 13)]
    pub seed: u64,

    /// Output file, or output directory for commands that write a corpus.
    /// Standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert dataset files into a canonical corpus directory.
    Ingest(IngestArgs),
    /// Check a corpus (and optionally a prediction file) for consistency.
    Validate(ValidateArgs),
    /// Reasoning-step histogram of one split.
    Stats(StatsArgs),
    /// Build prompt/target examples as JSONL.
    Build(BuildArgs),
    /// Rewrite coarse explanations into narrated ones.
    Refine(RefineArgs),
    /// Keep a seeded fraction of the train dialogues.
    Sample(SampleArgs),
    /// Joint goal accuracy, overall and per bucket.
    Eval(EvalArgs),
    /// Re-render a saved JSON report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputStyle {
    /// Canonical dialogue JSON.
    Canonical,
    WozBelief,
    M2mFlat,
    Multiwoz22,
}

#[derive(Debug, Args)]
pub struct CorpusArg {
    /// Corpus directory (schema.json plus dialogue files) or a dialogue file
    /// next to a schema.json.
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Dev,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub schema: PathBuf,
    /// Dataset file or directory; repeatable.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputStyle::Canonical)]
    pub style: InputStyle,
    /// Comma-separated domains to drop, e.g. `police,hospital`.
    #[arg(long, value_delimiter = ',')]
    pub exclude_domains: Vec<String>,
    /// Where to write the filtered schema; defaults to `schema.json` in --out.
    #[arg(long)]
    pub schema_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    #[arg(long)]
    pub template_file: Option<PathBuf>,
    /// JSON object mapping slot ids to questions.
    #[arg(long)]
    pub overrides_file: Option<PathBuf>,
    /// Value-only targets.
    #[arg(long)]
    pub no_explanations: bool,
    /// Also emit `none` targets for slots without a value.
    #[arg(long)]
    pub include_inactive: bool,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Examples JSONL produced by `build`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Strip speaker tags locally instead of calling the endpoint.
    #[arg(long)]
    pub offline: bool,
    #[arg(long)]
    pub max_parallel: Option<usize>,
    /// Refine dev and test examples too, not just train.
    #[arg(long)]
    pub all_splits: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Share of train dialogues to keep, in (0, 1].
    #[arg(long)]
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Mwz,
    M2m,
    Woz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Prediction JSONL: {dialogue_id, turn, slot_id, text} per line.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Normalization policy JSON; defaults apply to absent fields.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Bucket-spec file; repeatable.
    #[arg(long)]
    pub buckets: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub bucket_preset: Option<PresetArg>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON report written by `eval`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
    pub format: FormatArg,
}
