use std::path::PathBuf;

use batchcal::metrics::Estimator;
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_estimator, KernelChoice};

/// Adversarial batch-effect calibration for tabular data.
///
/// Every command writes `<command>_config.json` next to its outputs: the
/// fully resolved configuration, accepted back through `--config`.
#[derive(Debug, Parser)]
#[command(name = "batchcal", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic source/target pair and the distortion between them.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Synthetic-pair specification (JSON); defaults to the 25-feature
        /// benchmark pair.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Train a calibration map from --source to --target.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Apply a trained --model to --source, writing calibrated.csv.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Resampled MMD of source and, if given, calibrated rows against target.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Two-component PCA coordinates of the pooled batches, for plotting.
    Pca {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub calibrated: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags take precedence over its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSVs have no header row.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Hidden width of the generator's residual blocks.
    #[arg(long)]
    pub hidden_width: Option<usize>,
    /// Number of residual blocks.
    #[arg(long)]
    pub blocks: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Comma-separated Gaussian scales in target-standardized units, or
    /// "median".
    #[arg(long)]
    pub kernel_scales: Option<KernelChoice>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// biased or unbiased.
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<Estimator>,
}
