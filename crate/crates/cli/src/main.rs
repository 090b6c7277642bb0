//! `chordlm`: corpus ingestion, model training, Hyperband search and
//! evaluation for chord-sequence language models.
//!
//! Exit codes: 0 on success, 1 for data errors, 2 for usage errors.

mod artifact;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chordlm::embedding::EmbeddingKind;
use chordlm::neural::CellKind;

#[derive(Parser, Debug)]
#[command(name = "chordlm", version, about = "Chord-sequence language modelling toolkit")]
pub struct Cli {
    /// Worker threads for search and evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load, normalise, merge and de-duplicate the datasets of a corpus manifest.
    Ingest(IngestArgs),
    /// Stratified train/validation/test split.
    Split(SplitArgs),
    /// Add the 12 transpositions of every training song to a split.
    Augment(AugmentArgs),
    /// Train an n-gram or neural model.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Hyperband search over the neural hyper-parameter space.
    Search(SearchArgs),
    /// Score models on a split.
    Evaluate(EvaluateArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
    /// Re-run the command recorded in an artifact's manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Corpus manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output corpus (JSON Lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the summary table as JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Augment the training part in the same step.
    #[arg(long)]
    pub augment: bool,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum TrainCommand {
    /// Lidstone-smoothed n-gram; alpha tuned on the validation part.
    Ngram(NgramArgs),
    /// Recurrent network with early stopping on the validation part.
    Neural(NeuralArgs),
}

#[derive(Args, Debug)]
pub struct NgramArgs {
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Fixed smoothing constant instead of tuning.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated candidates for tuning.
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NeuralArgs {
    #[arg(long)]
    pub split: PathBuf,
    /// Full configuration (JSON); the flags below are ignored when given.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "gru")]
    pub cell: CellKind,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value = "one-hot")]
    pub embedding: EmbeddingKind,
    #[arg(long, default_value_t = 16)]
    pub embedding_dim: usize,
    #[arg(long)]
    pub skip: bool,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 15)]
    pub patience: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    #[arg(long)]
    pub no_clip: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Continue from the best epoch at a tenth of the learning rate.
    #[arg(long)]
    pub fine_tune: bool,
    /// Write the full training state here after every epoch.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Stop after this many completed epochs even if training has not
    /// converged; continue later with `--resume`.
    #[arg(long)]
    pub stop_after: Option<usize>,
    /// Resume from a checkpoint written by `--checkpoint`.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, default_value = "gru")]
    pub cell: CellKind,
    #[arg(long, default_value_t = 3)]
    pub eta: usize,
    /// Maximum budget per run, in epochs.
    #[arg(long, default_value_t = 81)]
    pub max_resource: usize,
    /// Choose the total budget so the search samples at most this many configs.
    #[arg(long)]
    pub target_configs: Option<usize>,
    /// Override the sampled hidden sizes (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub hidden_sizes: Option<Vec<usize>>,
    /// Override the sampled layer counts (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// Override the sampled embedding dimensions (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub embedding_dims: Option<Vec<usize>>,
    #[arg(long, default_value_t = 15)]
    pub patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Append-only JSON Lines leaderboard; existing rows are reused on resume.
    #[arg(long)]
    pub leaderboard: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub split: PathBuf,
    /// Model file, optionally `name=path`; `uniform` is built in. Repeatable.
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    /// Part of the split to score.
    #[arg(long, default_value = "test")]
    pub on: String,
    /// Write cumulative curves as CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long, default_value_t = chordlm::eval::DEFAULT_MIN_LENGTH)]
    pub min_length: usize,
    /// Number of bootstrap resamples for confidence intervals.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Paired t-tests between every pair of models.
    #[arg(long)]
    pub ttest: bool,
    /// Bonferroni divisor; defaults to the number of model pairs.
    #[arg(long)]
    pub comparisons: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// markov, motif, periodic or random.
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 100)]
    pub songs: usize,
    #[arg(long, default_value_t = 100)]
    pub min_len: usize,
    #[arg(long, default_value_t = 200)]
    pub max_len: usize,
    /// For `markov`: draw successors from this many chords per mode (0 = all 23).
    #[arg(long, default_value_t = 0)]
    pub moves: usize,
    /// Motif length for `motif`.
    #[arg(long, default_value_t = 8)]
    pub motif: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Artifact with an embedded or sidecar manifest, or a manifest file.
    pub artifact: PathBuf,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli, &argv[1..]) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
