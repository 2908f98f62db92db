use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use agenda_core::bootstrap::AnchorText;
use agenda_core::classify::SimilaritySource;

#[derive(Debug, Parser, Serialize)]
#[command(name = "agenda", version, about = "Agenda detection as textual entailment")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Validate inputs and report without writing files.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Stdout rendering. Files are always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Label schema file. Defaults to the built-in agenda taxonomy.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Flat JSON object of flag values. Flags given on the command line win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Entailment,
    Similarity,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Collapse NLI corpora under a directory into binary entailment pairs.
    BinarizeNli(BinarizeArgs),
    /// Build entailment training pairs from labeled messages.
    MakePairs(MakePairsArgs),
    /// Machine-translate a seeded fraction of pairs in place.
    Mix(MixArgs),
    /// Train/dev/test splits, one run per seed.
    Split(SplitArgs),
    /// Similarity-ranked annotation rounds.
    Bootstrap(BootstrapArgs),
    /// Predict label sets.
    Classify(ClassifyArgs),
    /// Sweep the decision threshold on a dev set.
    Calibrate(CalibrateArgs),
    /// Weighted F1 report.
    Evaluate(EvaluateArgs),
    /// Multi-label confusion matrix.
    Confusion(ConfusionArgs),
    /// Agreement between two annotators.
    Agreement(AgreementArgs),
    /// Paired significance test between two systems.
    Compare(CompareArgs),
    /// Mean and standard deviation over run reports.
    Aggregate(AggregateArgs),
    /// HTTP service for classification and annotation.
    Serve(ServeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BinarizeNli(_) => "binarize-nli",
            Command::MakePairs(_) => "make-pairs",
            Command::Mix(_) => "mix",
            Command::Split(_) => "split",
            Command::Bootstrap(b) => match b.action {
                BootstrapAction::Run(_) => "bootstrap run",
                BootstrapAction::Export(_) => "bootstrap export",
                BootstrapAction::Stats(_) => "bootstrap stats",
            },
            Command::Classify(_) => "classify",
            Command::Calibrate(_) => "calibrate",
            Command::Evaluate(_) => "evaluate",
            Command::Confusion(_) => "confusion",
            Command::Agreement(_) => "agreement",
            Command::Compare(_) => "compare",
            Command::Aggregate(_) => "aggregate",
            Command::Serve(_) => "serve",
        }
    }
}

fn parse_source(s: &str) -> Result<SimilaritySource, String> {
    s.parse().map_err(|e: agenda_core::Error| e.to_string())
}

fn parse_anchor(s: &str) -> Result<AnchorText, String> {
    s.parse().map_err(|e: agenda_core::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct BinarizeArgs {
    /// Directory of SNLI/MNLI/RTE files (.jsonl, .tsv), walked recursively.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "en")]
    pub lang: String,
}

#[derive(Debug, Args, Serialize)]
pub struct MakePairsArgs {
    /// Labeled dataset (JSON Lines).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub negatives: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MixArgs {
    /// Entailment pair file.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.30)]
    pub fraction: f64,
    #[arg(long)]
    pub target: String,
    /// Translation backend descriptor.
    #[arg(long, default_value = "mock")]
    pub mt: String,
    /// Where to write the mixing report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Receives `<run>.split.json` and `<run>/{train,dev,test}.jsonl`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// One run per seed, named R1, R2, ... Defaults to seed, seed+1, seed+2.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 0.1)]
    pub dev_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapArgs {
    #[command(subcommand)]
    pub action: BootstrapAction,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum BootstrapAction {
    /// Rank a sampled corpus against the label anchors and queue a new round.
    Run(BootstrapRunArgs),
    /// Write the settled messages of a round as a labeled dataset.
    Export(BootstrapExportArgs),
    /// Queue counts and agreement for a round.
    Stats(BootstrapStatsArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapRunArgs {
    /// Review state directory.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Unlabeled JSON Lines file; repeat for several. Each is sampled separately.
    #[arg(long, required = true)]
    pub corpus: Vec<PathBuf>,
    /// Embedding backend descriptor.
    #[arg(long, default_value = "mock")]
    pub backend: String,
    #[arg(long, default_value_t = 500)]
    pub k: usize,
    #[arg(long, default_value_t = 0.10)]
    pub fraction: f64,
    /// Restrict the round to these labels.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    /// Anchor text: `definition` or `hypothesis`.
    #[arg(long, value_parser = parse_anchor, default_value = "definition")]
    pub source: AnchorText,
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapExportArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Defaults to the latest round.
    #[arg(long)]
    pub round: Option<u32>,
    /// Labeled dataset output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapStatsArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub round: Option<u32>,
}

/// Where per-label scores come from.
#[derive(Debug, Args, Serialize)]
pub struct ScoreSource {
    /// Scorer (entailment) or embedder (similarity) descriptor:
    /// `mock`, `mock:<fixtures.json>`, `local:<dir>`, `http(s)://...` or a descriptor file.
    #[arg(long, required_unless_present = "scores")]
    pub backend: Option<String>,
    /// Precomputed score matrix instead of a backend.
    #[arg(long, conflicts_with = "backend")]
    pub scores: Option<PathBuf>,
    /// Entailment scores or embedding similarity.
    #[arg(long, value_enum, default_value_t = Mode::Entailment)]
    pub mode: Mode,
    /// Similarity anchor: `hypothesis` or `label`.
    #[arg(long, value_parser = parse_source, default_value = "hypothesis")]
    pub source: SimilaritySource,
    /// Also write the score matrix here.
    #[arg(long)]
    pub scores_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    /// Messages to classify (JSON Lines).
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub scoring: ScoreSource,
    /// Decision threshold in [0.30, 0.99].
    #[arg(long, required_unless_present = "calibration", conflicts_with = "calibration")]
    pub tau: Option<f64>,
    /// Calibration file written by `calibrate`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Predictions output (JSON Lines).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    /// Labeled dev set.
    #[arg(long)]
    pub dev: PathBuf,
    #[command(flatten)]
    pub scoring: ScoreSource,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Predictions: JSON Lines rows with `id` and `labels`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Labeled dataset covering the same ids.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ConfusionArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the matrix as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AgreementArgs {
    /// First annotator: rows with `id` and `labels` (or `gold`).
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value = "a")]
    pub name_a: String,
    #[arg(long, default_value = "b")]
    pub name_b: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AggregateArgs {
    /// Evaluation reports, one per run.
    #[arg(long, required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Descriptor used for the scorer, embedder and translator.
    #[arg(long)]
    pub backend: Option<String>,
    /// Default corpus for `/bootstrap/run`.
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    /// Allow cross-origin browser clients.
    #[arg(long)]
    pub cors: bool,
}
