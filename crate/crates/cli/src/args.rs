use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// PPG anomaly detection: preprocessing, self-supervised encoder training,
/// detectors and evaluation scenarios.
///
/// Exit codes: 0 success, 2 configuration error, 3 ingestion error
/// (unreadable or malformed input, I/O failures), 4 computation error
/// (degenerate data, fit or evaluation failure, failed sweep entries).
#[derive(Debug, Parser)]
#[command(name = "ppgad", version)]
pub struct Cli {
    /// Worker threads for evaluation units and batch work.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic sitting/walking cohort and its manifest.
    Synth(SynthArgs),
    /// Filter, normalise, segment and resample a dataset into a window archive.
    Preprocess(PreprocessArgs),
    /// Train pretext encoders on a window archive.
    Train(TrainCmdArgs),
    /// Encode every window of an archive with a checkpoint.
    Extract(ExtractArgs),
    /// Fit one anomaly detector on selected windows.
    Fit(FitArgs),
    /// Score selected windows with a fitted detector.
    Score(ScoreArgs),
    /// Run evaluation scenarios and write reports.
    Scenario(ScenarioCmdArgs),
    /// Retrain encoders over several latent sizes and evaluate each.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub subjects: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Length of each recording in seconds.
    #[arg(long, default_value_t = 120.0)]
    pub duration_s: f64,
    #[arg(long, default_value_t = 64.0)]
    pub fs: f64,
    /// Pass band recorded in the manifest, LOW:HIGH in Hz.
    #[arg(long, default_value = "0.1:10")]
    pub band: String,
    /// Output directory; receives one file per recording and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Pass band LOW:HIGH in Hz; defaults to the manifest's band.
    #[arg(long)]
    pub band: Option<String>,
    #[arg(long, default_value_t = 8.0)]
    pub window_s: f64,
    #[arg(long, default_value_t = 7.5)]
    pub overlap_s: f64,
    /// Samples per window after resampling.
    #[arg(long, default_value_t = 512)]
    pub target_len: usize,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Window archive to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 64)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 64)]
    pub kernel: usize,
    #[arg(long, default_value_t = 32)]
    pub channels: usize,
    #[arg(long, default_value_t = 5)]
    pub blocks: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub decay: f64,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Use every n-th window of each recording for pretext training.
    #[arg(long, default_value_t = 1)]
    pub pretext_stride: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainCmdArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Train one encoder per subject, each without that subject's windows.
    #[arg(long)]
    pub loso: bool,
    /// Output directory for checkpoints and training traces.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSON file of latent vectors with provenance.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Only use windows of these subjects (repeatable).
    #[arg(long = "subject")]
    pub subjects: Vec<String>,
    /// Only use windows of these activities (repeatable).
    #[arg(long = "activity")]
    pub activities: Vec<String>,
    /// Encoder checkpoint; without one the original windows are used.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 256)]
    pub subsample: usize,
    /// Fraction of variance the PCA subspace must explain.
    #[arg(long, default_value_t = 0.99)]
    pub variance_threshold: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[command(flatten)]
    pub select: SelectArgs,
    #[arg(long, default_value = "mvn")]
    pub detector: String,
    #[command(flatten)]
    pub params: DetectorArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Detector JSON file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[command(flatten)]
    pub select: SelectArgs,
    /// Detector JSON written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// JSON file of scores with provenance.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// movement, biometric or all.
    #[arg(long, default_value = "movement")]
    pub task: String,
    /// generalized, personalized or all.
    #[arg(long, default_value = "generalized")]
    pub mode: String,
    /// mvn, iforest, pca or all.
    #[arg(long, default_value = "mvn")]
    pub detector: String,
    #[command(flatten)]
    pub params: DetectorArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "sitting")]
    pub normal: String,
    #[arg(long, default_value = "walking")]
    pub anomalous: String,
}

#[derive(Debug, Args)]
pub struct ScenarioCmdArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// learned, original or all.
    #[arg(long, default_value = "learned")]
    pub representation: String,
    /// Checkpoint file or training output directory; repeat once per
    /// training repeat to average over repeats.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report.txt and report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub archive: PathBuf,
    /// Comma-separated latent sizes, e.g. 2,8,64.
    #[arg(long)]
    pub dims: String,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Directory for sweep.csv and sweep.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
