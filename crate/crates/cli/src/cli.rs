//! Argument definitions for the `playseq` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "playseq",
    version,
    about = "Train and evaluate next-artist predictors for music play sequences",
    after_help = "Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.\n\
                  Config precedence: flags > --config file > built-in defaults."
)]
pub struct Cli {
    /// Cap on worker threads (default: all cores); results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Optional TOML config file supplying defaults for the tuning flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output format for summaries and reports on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
pub enum Command {
    /// Sample a synthetic corpus from a randomly drawn model and write both.
    Generate(GenerateArgs),
    /// Train a model on a corpus and write it to disk.
    Train(TrainArgs),
    /// Write per-user top-n next-artist predictions as CSV.
    Predict(PredictArgs),
    /// Score a predictions file against held-out targets.
    Evaluate(EvaluateArgs),
    /// Run all six predictors under one protocol and report MAP@K.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Number of users (rows) [default: 972]
    #[arg(long)]
    pub users: Option<usize>,

    /// Sequence length (columns) [default: 29]
    #[arg(long)]
    pub length: Option<usize>,

    /// Artist vocabulary size [default: 50]
    #[arg(long)]
    pub artists: Option<usize>,

    /// Hidden states of the planted model [default: 5]
    #[arg(long)]
    pub states: Option<usize>,

    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Corpus CSV output path.
    #[arg(short, long)]
    pub output: PathBuf,

    /// Planted model output path [default: <output>.model.json]
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrainModel {
    /// Hidden Markov model via multi-sequence Baum-Welch.
    Hmm,
    /// Item-item similarity cache over play counts.
    CfItem,
    /// Item-item similarity cache over binarized counts.
    CfPseudo,
}

#[derive(Args)]
pub struct TrainArgs {
    /// What to train.
    #[arg(long, value_enum)]
    pub model: TrainModel,

    /// Corpus CSV path.
    #[arg(long)]
    pub corpus: PathBuf,

    /// Output path (model JSON, or binary similarity cache).
    #[arg(short, long)]
    pub output: PathBuf,

    /// Hidden states [default: 20]
    #[arg(long)]
    pub states: Option<usize>,

    /// Iteration budget for Baum-Welch [default: 100]
    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Relative log-likelihood improvement that stops training [default: 1e-4]
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,

    /// Additive smoothing for transition/emission updates [default: 1e-6]
    #[arg(long, allow_negative_numbers = true)]
    pub smoothing: Option<f64>,

    /// RNG seed for initialization [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Predictor {
    HfCorpus,
    HfCurrent,
    CfUser,
    CfItem,
    CfPseudo,
    Hmm,
    Mhmm,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Which predictor to run.
    #[arg(long, value_enum)]
    pub model: Predictor,

    /// Corpus CSV path; each row is the listening history to continue.
    #[arg(long)]
    pub corpus: PathBuf,

    /// Trained model file (required for hmm, and for mhmm when n1 > 0).
    #[arg(long)]
    pub hmm_model: Option<PathBuf>,

    /// Similarity cache from `train --model cf-item|cf-pseudo`; recomputed
    /// when absent or built from a different corpus.
    #[arg(long)]
    pub sims: Option<PathBuf>,

    /// Predictions CSV output path.
    #[arg(short, long)]
    pub output: PathBuf,

    /// Candidates per user [default: 10]
    #[arg(long)]
    pub n: Option<usize>,

    /// Mixture slots from the HMM ranking [default: 7]
    #[arg(long)]
    pub n1: Option<usize>,

    /// Mixture slots from the CF ranking [default: 3]
    #[arg(long)]
    pub n2: Option<usize>,

    /// Neighborhood size for the CF predictors [default: 30]
    #[arg(long)]
    pub k: Option<usize>,

    /// CF variant filling the mixture's CF slots [default: binary-pseudo]
    #[arg(long)]
    pub cf: Option<String>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Predictions CSV as written by `predict`.
    #[arg(long)]
    pub predictions: PathBuf,

    /// Targets file: one artist code per line, row-aligned with the corpus.
    #[arg(long)]
    pub targets: Option<PathBuf>,

    /// Corpus whose last column provides the targets (leave-last-out).
    #[arg(long)]
    pub corpus: Option<PathBuf>,

    /// Metric cutoff K [default: 10]
    #[arg(long)]
    pub map_k: Option<usize>,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Corpus CSV path.
    #[arg(long)]
    pub corpus: PathBuf,

    /// External targets file; without it the corpus is split leave-last-out.
    #[arg(long)]
    pub targets: Option<PathBuf>,

    /// Where to write the JSON report (also printed with --format json).
    #[arg(long, short = 'o')]
    pub report: Option<PathBuf>,

    /// Hidden states [default: 20]
    #[arg(long)]
    pub states: Option<usize>,

    /// Iteration budget for Baum-Welch [default: 100]
    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Relative log-likelihood improvement that stops training [default: 1e-4]
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,

    /// Additive smoothing for transition/emission updates [default: 1e-6]
    #[arg(long, allow_negative_numbers = true)]
    pub smoothing: Option<f64>,

    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Neighborhood size for the CF predictors [default: 30]
    #[arg(long)]
    pub k: Option<usize>,

    /// Candidates per user [default: 10]
    #[arg(long)]
    pub n: Option<usize>,

    /// Mixture slots from the HMM ranking [default: 7]
    #[arg(long)]
    pub n1: Option<usize>,

    /// Mixture slots from the CF ranking [default: 3]
    #[arg(long)]
    pub n2: Option<usize>,

    /// Metric cutoff K [default: 10]
    #[arg(long)]
    pub map_k: Option<usize>,

    /// CF variant filling the mixture's CF slots [default: binary-pseudo]
    #[arg(long)]
    pub cf: Option<String>,
}
