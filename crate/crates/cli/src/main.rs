//! `kgwalk`: walk extraction, corpus transforms, embedding training and
//! node-classification evaluation over RDF graphs.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "kgwalk", version, about = "Random-walk embeddings for knowledge graphs")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract a walk corpus from an N-Triples graph.
    Extract(ExtractArgs),
    /// Apply one corpus transform to an existing corpus.
    Transform(TransformArgs),
    /// Train skip-gram embeddings on a corpus.
    Train(TrainCmdArgs),
    /// Score embeddings on a labelled train/test split.
    Evaluate(EvaluateArgs),
    /// Check that WL labels never merge distinct entities.
    WlCheck(WlCheckArgs),
    /// Extract, train and evaluate end to end, with repetitions.
    Pipeline(PipelineArgs),
    /// Render per-dataset scores as a rank table.
    Rank(RankArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Random,
    Wl,
    Community,
    Anonymous,
    Walklet,
    Halk,
    Ngram,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Wl => "wl",
            Strategy::Community => "community",
            Strategy::Anonymous => "anonymous",
            Strategy::Walklet => "walklet",
            Strategy::Halk => "halk",
            Strategy::Ngram => "ngram",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HalkMode {
    /// One corpus per threshold; the best by cross-validation is kept.
    Tune,
    /// All thresholds concatenated into one corpus.
    Concat,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// N-Triples file (gzip accepted).
    #[arg(long)]
    pub graph: PathBuf,
    /// Predicates to drop before building the graph, one IRI per line.
    #[arg(long)]
    pub leak_predicates: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for extraction and training [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Single worker everywhere; output is byte-reproducible.
    #[arg(long)]
    pub deterministic: bool,
    /// Output directory.
    #[arg(long, env = "KGWALK_OUT_DIR", default_value = "kgwalk-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct WalkArgs {
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    /// Walk depth in edges of the expanded graph.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    /// Cap on walks per entity; unset means exhaustive.
    #[arg(long)]
    pub max_walks: Option<usize>,
    /// WL iterations (the corpus holds iterations + 1 copies).
    #[arg(long, default_value_t = 4)]
    pub wl_iterations: usize,
    /// Community walks: probability of a normal extension.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Community walks: probability of a community teleport.
    #[arg(long, default_value_t = 0.1)]
    pub hop_prob: f64,
    /// Louvain resolution.
    #[arg(long, default_value_t = 1.0)]
    pub resolution: f64,
    /// Precomputed community partition (TSV); otherwise Louvain runs and is cached.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// HALK frequency thresholds.
    #[arg(long, value_delimiter = ',', default_values_t = kgwalk::transforms::DEFAULT_HALK_THRESHOLDS)]
    pub thresholds: Vec<f64>,
    /// N-gram size.
    #[arg(short = 'n', long = "ngram-size", default_value_t = 2)]
    pub n: usize,
    /// Wildcards injected before n-gram relabelling.
    #[arg(long, default_value_t = 0)]
    pub wildcards: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 500)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    /// Negative samples per positive pair.
    #[arg(long, default_value_t = 25)]
    pub neg: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub min_lr: f64,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifierArgs {
    /// Regularization grid searched by cross-validation.
    #[arg(long, value_delimiter = ',', default_values_t = kgwalk::evaluation::DEFAULT_REG_GRID)]
    pub reg_grid: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Split file; its entities become the walk roots (default: every entity).
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Corpus path [default: OUT_DIR/corpus.tsv].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("transform").required(true).args(["anonymous", "walklet", "halk", "ngram"])))]
pub struct TransformArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub anonymous: bool,
    #[arg(long)]
    pub walklet: bool,
    #[arg(long)]
    pub halk: bool,
    #[arg(long)]
    pub ngram: bool,
    /// HALK thresholds [default: 0,0.1,0.05,0.01,0.005,0.001,0.0005,0.0001].
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Write one corpus per threshold (`<output>.t<i>`) instead of concatenating.
    #[arg(long)]
    pub per_threshold: bool,
    /// N-gram size [default: 2].
    #[arg(short = 'n', long = "ngram-size")]
    pub n: Option<usize>,
    /// Wildcards injected before n-gram relabelling [default: 0].
    #[arg(long)]
    pub wildcards: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainCmdArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Embedding path [default: OUT_DIR/embeddings.txt]; metadata goes next to it as `.meta`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub splits: PathBuf,
    /// Corpus the embeddings were trained on; its digest must match the metadata.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Report path [default: OUT_DIR/report.json].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WlCheckArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 4)]
    pub iterations: usize,
    /// Also check blank nodes.
    #[arg(long)]
    pub include_blank: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub splits: PathBuf,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub classifier: ClassifierArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(long, value_enum, default_value_t = HalkMode::Tune)]
    pub halk_mode: HalkMode,
    /// Tune n in {1,2,3} and wildcards in {0,1} by cross-validation.
    #[arg(long)]
    pub tune_ngram: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// TSV: header `dataset TAB strategy...`, one row per dataset.
    #[arg(long)]
    pub scores: PathBuf,
}

/// Errors that map to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract(a) => stages::extract(&a),
        Command::Transform(a) => stages::transform(&a),
        Command::Train(a) => stages::train(&a),
        Command::Evaluate(a) => stages::evaluate(&a),
        Command::WlCheck(a) => stages::wl_check(&a),
        Command::Pipeline(a) => stages::pipeline(&a),
        Command::Rank(a) => stages::rank(&a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand_config_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
