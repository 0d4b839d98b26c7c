use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const DEFAULT_GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];

/// Hybrid ADOS + face-image pre-screening: synthesize data, train the two
/// modules, sweep learning rates, fuse their scores and inspect reports.
///
/// Every subcommand accepts `--config FILE`; keys of the file's
/// `[<subcommand>]` table are read as flags, and flags given on the command
/// line take precedence.
#[derive(Debug, Parser)]
#[command(name = "hybridscreen", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Split 80/20, train one model, evaluate it on the held-out part.
    Train(TrainArgs),
    /// Train a tabular model across a learning-rate grid.
    Sweep(SweepArgs),
    /// Fuse tabular and image scores under one or all strategies.
    Fuse(FuseArgs),
    /// Print, compare or aggregate stored run reports.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Root directory that holds run directories.
    #[arg(long, env = "HYBRIDSCREEN_OUT", default_value = "runs", value_name = "DIR")]
    #[serde(skip)]
    pub out_dir: PathBuf,

    /// Run directory name [default: <command>-<hash of the arguments>].
    #[arg(long, value_name = "ID")]
    #[serde(skip)]
    pub run_id: Option<String>,

    /// Replace the run directory if it already exists.
    #[arg(long)]
    #[serde(skip)]
    pub overwrite: bool,

    /// TOML file whose `[<subcommand>]` table supplies default flags.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Tabular,
    Image,
    Paired,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// Which modality to generate; `paired` writes both with shared subjects.
    #[arg(long, value_enum)]
    pub kind: SynthKind,

    /// Number of subjects.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Fraction of ASD subjects; the count is rounded.
    #[arg(long, default_value_t = 0.5)]
    pub asd_fraction: f64,

    /// ADOS items per record: 5 (module 2) or 10 (module 3).
    #[arg(long, default_value_t = 10)]
    pub features: usize,

    /// Class separation; 0 makes the classes indistinguishable.
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,

    /// Random seed.
    #[arg(long)]
    pub seed: u64,

    /// Image height in pixels.
    #[arg(long, default_value_t = 16)]
    pub height: usize,

    /// Image width in pixels.
    #[arg(long, default_value_t = 16)]
    pub width: usize,

    /// Image channels: 1 (PGM) or 3 (PPM).
    #[arg(long, default_value_t = 1)]
    pub channels: usize,

    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logreg,
    Svm,
    Cnn,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Model to train; `cnn` expects an image directory, the others an ADOS CSV.
    #[arg(long, value_enum)]
    pub model: ModelKind,

    /// ADOS CSV (`id,label,<items>`) or image directory with `labels.csv`.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,

    /// Seed for the split, initialization and batch order.
    #[arg(long)]
    pub seed: u64,

    /// Fraction of subjects used for training; the rest is the test set.
    #[arg(long, default_value_t = 0.8)]
    pub train_ratio: f64,

    /// Learning rate [default: 1.0 for linear models, 0.1 for cnn].
    #[arg(long)]
    pub lr: Option<f64>,

    /// Training epochs [default: 500 for linear models, 30 for cnn].
    #[arg(long)]
    pub epochs: Option<usize>,

    /// L2 penalty for logistic regression.
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,

    /// Regularization strength λ of the linear SVM.
    #[arg(long, default_value_t = 0.01)]
    pub svm_lambda: f64,

    /// CNN mini-batch size.
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,

    /// Fraction of the training part held out as the CNN validation set.
    #[arg(long, default_value_t = 0.125)]
    pub val_fraction: f64,

    /// Epochs without validation improvement before the rate decays.
    #[arg(long, default_value_t = 3)]
    pub patience: usize,

    /// Factor applied to the rate on a plateau.
    #[arg(long, default_value_t = 0.5)]
    pub lr_decay: f64,

    /// Floor for the decayed rate.
    #[arg(long, default_value_t = 1e-4)]
    pub min_lr: f64,

    /// Image directory appended to the CNN validation set (flagged in reports).
    #[arg(long, value_name = "DIR")]
    pub augment_validation: Option<PathBuf>,

    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearChoice {
    Logreg,
    Svm,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// ADOS CSV (`id,label,<items>`).
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,

    /// Seed for the shared 80/20 split.
    #[arg(long)]
    pub seed: u64,

    /// Linear model to sweep.
    #[arg(long, value_enum, default_value_t = LinearChoice::Logreg)]
    pub model: LinearChoice,

    /// Strictly increasing, comma-separated learning rates.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = DEFAULT_GRID)]
    pub grid: Vec<f64>,

    /// Epochs per grid point.
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,

    /// L2 penalty for logistic regression.
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,

    /// Regularization strength λ of the linear SVM.
    #[arg(long, default_value_t = 0.01)]
    pub svm_lambda: f64,

    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyChoice {
    Simple,
    ByTrainCount,
    ByAsdCount,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FuseArgs {
    /// Tabular scores, CSV `subject_id,module,probability`.
    #[arg(long, value_name = "FILE")]
    pub tabular_scores: PathBuf,

    /// Image scores, CSV `subject_id,module,probability`.
    #[arg(long, value_name = "FILE")]
    pub image_scores: PathBuf,

    /// Trained tabular model; its provenance sets the weighted strategies.
    #[arg(long, value_name = "FILE")]
    pub tabular_model: PathBuf,

    /// Trained CNN manifest; its provenance sets the weighted strategies.
    #[arg(long, value_name = "FILE")]
    pub image_model: PathBuf,

    /// Ground truth, CSV `subject_id,label`; enables metrics and reports.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,

    /// Fusion strategy, or `all` for one output set per strategy.
    #[arg(long, value_enum, default_value_t = StrategyChoice::All)]
    pub strategy: StrategyChoice,

    /// Fused probability at or above which a subject is labelled ASD.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,

    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Report files written by `train`, `sweep` or `fuse`.
    #[arg(required = true, value_name = "REPORT")]
    pub reports: Vec<PathBuf>,

    /// Print a CSV comparison table instead of summaries.
    #[arg(long)]
    pub table: bool,

    /// With exactly two reports (tabular first, image second), print their
    /// metrics combined under this strategy.
    #[arg(long, value_enum, value_name = "STRATEGY")]
    pub aggregate: Option<StrategyChoice>,

    /// TOML file whose `[report]` table supplies default flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}
