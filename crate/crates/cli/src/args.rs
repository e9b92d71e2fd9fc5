use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use headpop::corpus::DatasetFormat;
use headpop::training::{EmbeddingMode, TrainConfig};
use headpop::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "headpop", version, about = "Headline popularity models: label, train, evaluate, predict, serve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label a dataset by per-group metric median and write labeled JSONL.
    Label(LabelArgs),
    /// Train a model on a stratified holdout split, or run k-fold evaluation.
    Train(TrainArgs),
    /// Evaluate a saved model on a labeled dataset.
    Eval(EvalArgs),
    /// Print the popularity probability and class of one title.
    Predict(TitleArgs),
    /// Print per-word contributions for one title.
    Introspect(IntrospectArgs),
    /// Start the HTTP scoring service.
    Serve(ServeArgs),
    /// Write a seeded synthetic labeled corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset file (JSONL or CSV).
    #[arg(long)]
    pub data: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

impl DataArgs {
    pub fn format(&self) -> DatasetFormat {
        match self.format {
            Some(FormatArg::Jsonl) => DatasetFormat::Jsonl,
            Some(FormatArg::Csv) => DatasetFormat::Csv,
            None => DatasetFormat::from_path(&self.data),
        }
    }
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Output JSONL path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EmbeddingModeArg {
    Static,
    FineTune,
}

/// Training settings; each overrides the config file when given.
#[derive(Debug, Default, Args)]
pub struct TrainFlags {
    /// JSON training config; flags below win over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub model_kind: Option<ModelKind>,
    /// Recurrent hidden size.
    #[arg(long = "h")]
    pub hidden: Option<usize>,
    /// Embedding dimension.
    #[arg(long = "d")]
    pub embed_dim: Option<usize>,
    #[arg(long, value_enum)]
    pub embedding_mode: Option<EmbeddingModeArg>,
    /// GloVe-format vectors to initialize the embedding with.
    #[arg(long)]
    pub glove: Option<PathBuf>,
    #[arg(long)]
    pub embeddings_label: Option<String>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Maximum number of epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub plateau_patience: Option<usize>,
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub max_seq_len: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where a last-good checkpoint is written if training diverges.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: headpop::Error| e.to_string())
}

impl TrainFlags {
    pub fn apply(&self, c: &mut TrainConfig) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        set(&mut c.model_kind, &self.model_kind);
        set(&mut c.hidden, &self.hidden);
        set(&mut c.embed_dim, &self.embed_dim);
        if let Some(m) = self.embedding_mode {
            c.embedding_mode = match m {
                EmbeddingModeArg::Static => EmbeddingMode::Static,
                EmbeddingModeArg::FineTune => EmbeddingMode::FineTune,
            };
        }
        if self.glove.is_some() {
            c.glove_path = self.glove.clone();
        }
        if self.embeddings_label.is_some() {
            c.embeddings_label = self.embeddings_label.clone();
        }
        set(&mut c.batch_size, &self.batch_size);
        set(&mut c.max_epochs, &self.epochs);
        set(&mut c.learning_rate, &self.learning_rate);
        set(&mut c.plateau_patience, &self.plateau_patience);
        set(&mut c.early_stop_patience, &self.early_stop_patience);
        set(&mut c.validation_fraction, &self.validation_fraction);
        set(&mut c.max_seq_len, &self.max_seq_len);
        set(&mut c.min_count, &self.min_count);
        set(&mut c.seed, &self.seed);
        if self.checkpoint_dir.is_some() {
            c.checkpoint_dir = self.checkpoint_dir.clone();
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Where to write the trained model. Required unless --kfold is given.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Where to write the JSON report; stdout when omitted.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Run k-fold cross-validation instead of a single holdout split.
    #[arg(long)]
    pub kfold: Option<usize>,
    /// Fraction held out for the final test evaluation.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: DataArgs,
}

#[derive(Debug, Args)]
pub struct TitleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub title: String,
}

#[derive(Debug, Args)]
pub struct IntrospectArgs {
    #[command(flatten)]
    pub title: TitleArgs,
    /// Print JSON instead of aligned text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Allowed CORS origin ("*" for any).
    #[arg(long, default_value = headpop_service::DEFAULT_CORS_ORIGIN)]
    pub cors_origin: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    /// Popular iff the title contains a marker word.
    Marker,
    /// Popular iff one marker word precedes another.
    Order,
    /// Popular iff the title holds a positive cue word.
    Cue,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// For `cue`: also write matching GloVe-format vectors here.
    #[arg(long)]
    pub glove_out: Option<PathBuf>,
    /// Dimension of the vectors written by --glove-out.
    #[arg(long, default_value_t = 16)]
    pub glove_dim: usize,
}
