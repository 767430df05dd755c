//! Command-line front end for `sslstm`.
//!
//! [`run`] parses arguments, dispatches one subcommand and maps failures to
//! exit codes: 0 success, 1 usage error, 2 malformed input data, 3 numeric
//! failure.

mod commands;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sslstm::datamine::MiningConfig;
use sslstm::neural::{Activation, Channels, ModelConfig};
use sslstm::training::TrainConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sslstm", version, about = "Emotion classification for short conversations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tokenize and normalize raw utterances, one per line
    Normalize(NormalizeArgs),
    /// Stratified train/validation split of a labeled dataset
    Split(SplitArgs),
    /// Train a dual-channel LSTM or a baseline and save a checkpoint
    Train(Box<TrainArgs>),
    /// Score a checkpoint on a labeled dataset
    Eval(EvalArgs),
    /// Label a dataset with a checkpoint's predictions
    Predict(PredictArgs),
    /// Cosine similarity of word pairs under both embedding tables
    Embcos(EmbcosArgs),
    /// Mine candidate utterances for judging
    Mine(MineArgs),
    /// Label distribution of a dataset
    Stats(StatsArgs),
    /// Fleiss' kappa of a judgment-count file
    Kappa(KappaArgs),
    /// Compare analytic and finite-difference gradients
    Gradcheck(Box<GradcheckArgs>),
}

#[derive(Args, Debug, Clone, Default)]
pub struct OutputArg {
    /// Write the report here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct LexiconArg {
    /// Emoticon lexicon TSV replacing the shipped one
    #[arg(long, value_name = "PATH")]
    pub lexicon: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EmbeddingArgs {
    /// Semantic word vectors (`word v1 .. vD` per line)
    #[arg(long, value_name = "PATH")]
    pub semantic: Option<PathBuf>,
    /// Sentiment word vectors (`word v1 .. vD` per line)
    #[arg(long, value_name = "PATH")]
    pub sentiment: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Encoders to use: both, semantic or sentiment
    #[arg(long, default_value_t = ModelConfig::default().channels)]
    pub channels: Channels,
    /// Semantic LSTM hidden width
    #[arg(long, default_value_t = ModelConfig::default().semantic_hidden)]
    pub semantic_hidden: usize,
    /// Sentiment LSTM hidden width
    #[arg(long, default_value_t = ModelConfig::default().sentiment_hidden)]
    pub sentiment_hidden: usize,
    /// Fully connected layer width
    #[arg(long, default_value_t = ModelConfig::default().fc_hidden)]
    pub fc_hidden: usize,
    /// Fully connected layer activation: relu or tanh
    #[arg(long, default_value_t = ModelConfig::default().activation)]
    pub activation: Activation,
    /// Tokens beyond this are dropped
    #[arg(long, default_value_t = ModelConfig::default().max_seq_len)]
    pub max_seq_len: usize,
    /// Update embedding vectors during training
    #[arg(long)]
    pub fine_tune_embeddings: bool,
}

impl ModelArgs {
    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            channels: self.channels,
            semantic_hidden: self.semantic_hidden,
            sentiment_hidden: self.sentiment_hidden,
            fc_hidden: self.fc_hidden,
            activation: self.activation,
            max_seq_len: self.max_seq_len,
            fine_tune_embeddings: self.fine_tune_embeddings,
        }
    }
}

#[derive(Args, Debug)]
pub struct NormalizeArgs {
    /// Raw text, one utterance per line (stdin when omitted)
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub lexicon: LexiconArg,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Labeled dataset TSV
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Where the training side is written
    #[arg(long, value_name = "PATH")]
    pub train_out: PathBuf,
    /// Where the validation side is written
    #[arg(long, value_name = "PATH")]
    pub valid_out: PathBuf,
    /// Share of each label sent to the training side
    #[arg(long, default_value_t = 0.9)]
    pub ratio: f64,
    /// Seeds the per-label shuffle
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Sslstm,
    Nb,
    Svm,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Labeled training dataset TSV
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    /// Labeled validation dataset TSV for early stopping
    #[arg(long, value_name = "PATH", conflicts_with = "split_ratio")]
    pub valid: Option<PathBuf>,
    /// Without --valid, hold out a stratified validation share of --train
    #[arg(long, default_value_t = 0.9)]
    pub split_ratio: f64,
    /// Where to write the checkpoint
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Model to train
    #[arg(long, value_enum, default_value_t = ModelKind::Sslstm)]
    pub kind: ModelKind,
    #[command(flatten)]
    pub net: ModelArgs,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    /// SGD learning rate
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    /// Maximum tokens per batch
    #[arg(long, default_value_t = TrainConfig::default().token_budget)]
    pub token_budget: usize,
    /// Upper bound on training epochs
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    pub epochs: usize,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    pub patience: usize,
    /// Weight examples by inverse class frequency
    #[arg(long)]
    pub class_weights: bool,
    /// Worker threads for gradient computation (results match serial)
    #[arg(long, value_name = "N")]
    pub parallel: Option<usize>,
    /// Seeds initialization, splitting and shuffling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Naive Bayes smoothing constant
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// SVM regularization strength
    #[arg(long, default_value_t = sslstm::baselines::SvmConfig::default().lambda)]
    pub lambda: f64,
    /// SVM passes over the data
    #[arg(long, default_value_t = sslstm::baselines::SvmConfig::default().epochs)]
    pub svm_epochs: usize,
    #[command(flatten)]
    pub lexicon: LexiconArg,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Tsv,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint to score
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Second checkpoint; adds McNemar's test on paired correctness
    #[arg(long, value_name = "PATH")]
    pub compare_model: Option<PathBuf>,
    /// Labeled dataset TSV
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    /// Report layout
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    #[command(flatten)]
    pub lexicon: LexiconArg,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Checkpoint to predict with
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Dataset TSV; a label column, if present, is replaced
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    #[command(flatten)]
    pub lexicon: LexiconArg,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Args, Debug)]
pub struct EmbcosArgs {
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    /// `word<TAB>word` lines; defaults to depression/:'(, happy/sad, best/great
    #[arg(long, value_name = "PATH")]
    pub pairs: Option<PathBuf>,
    #[command(flatten)]
    pub lexicon: LexiconArg,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MineMode {
    /// Cosine-threshold lookalikes of seed utterances, pruned
    T1,
    /// Questions drawing the responses most typical of a class
    T2,
    /// Negative sampling away from known positives
    Neg,
}

#[derive(Args, Debug)]
pub struct MineArgs {
    /// Mining technique
    #[arg(long, value_enum)]
    pub mode: MineMode,
    /// Known class utterances, one per line (positives for neg)
    #[arg(long, value_name = "PATH")]
    pub seeds: PathBuf,
    /// Utterances to search, one per line (t1, neg)
    #[arg(long, value_name = "PATH")]
    pub pool: Option<PathBuf>,
    /// `question<TAB>answer` lines (t2)
    #[arg(long, value_name = "PATH")]
    pub pairs: Option<PathBuf>,
    /// Word vectors for sentence embeddings (t1, neg)
    #[arg(long, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,
    /// Class being mined: happy, sad or angry (t1)
    #[arg(long)]
    pub target: Option<sslstm::Emotion>,
    /// Minimum cosine to a seed (t1)
    #[arg(long, default_value_t = MiningConfig::default().threshold)]
    pub threshold: f64,
    /// Longest candidate kept, in tokens (t1)
    #[arg(long, default_value_t = MiningConfig::default().max_len)]
    pub max_len: usize,
    /// Responses kept (t2)
    #[arg(long, default_value_t = MiningConfig::default().top_k)]
    pub top_k: usize,
    /// Minimum response count (t2)
    #[arg(long, default_value_t = MiningConfig::default().min_frequency)]
    pub min_frequency: usize,
    /// Pool items at or above this cosine to any positive are ineligible (neg)
    #[arg(long, default_value_t = MiningConfig::default().negative_threshold)]
    pub negative_threshold: f64,
    /// Negatives to draw (neg)
    #[arg(long)]
    pub count: Option<usize>,
    /// Seeds negative sampling (neg)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub lexicon: LexiconArg,
    #[command(flatten)]
    pub output: OutputArg,
}

impl MineArgs {
    pub fn config(&self) -> MiningConfig {
        MiningConfig {
            threshold: self.threshold,
            max_len: self.max_len,
            top_k: self.top_k,
            min_frequency: self.min_frequency,
            negative_threshold: self.negative_threshold,
        }
    }
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Labeled dataset TSV
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Args, Debug)]
pub struct KappaArgs {
    /// `item<TAB>happy<TAB>sad<TAB>angry<TAB>others` judge counts
    #[arg(long, value_name = "PATH")]
    pub judgments: PathBuf,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Labeled dataset TSV; the first --examples rows are checked
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Check a trained checkpoint instead of a fresh initialization
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub net: ModelArgs,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
    /// Number of leading examples to check
    #[arg(long, default_value_t = 1)]
    pub examples: usize,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Largest acceptable relative error
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Seeds initialization and coordinate subsampling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub lexicon: LexiconArg,
    #[command(flatten)]
    pub output: OutputArg,
}

/// A failed command: exit code plus a message naming the file or flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    /// Classifies a library error and prefixes `context`, usually a path.
    pub fn from_lib(context: impl fmt::Display, e: sslstm::Error) -> Failure {
        let code = match &e {
            sslstm::Error::Numeric(_) => EXIT_NUMERIC,
            e if e.is_data_error() => EXIT_DATA,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: format!("{context}: {e}"),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}
