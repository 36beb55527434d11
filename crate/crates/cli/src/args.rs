//! Command-line surface.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "specfront",
    version,
    about = "Trainable spectrogram front-ends: synthesize toy speech data, train keyword-spotting and phoneme models under front-end freeze settings, run masking and Mel-count ablations, inspect learned bases, and verify gradients."
)]
pub struct Cli {
    /// Flat key=value config file; command-line flags win over file entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for anything random in the subcommand.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a deterministic synthetic toy dataset and its manifest.
    Synth(SynthArgs),
    /// Train a model end to end and write reports/checkpoints.
    Train(TrainArgs),
    /// Evaluate saved parameters on a manifest.
    Eval(EvalArgs),
    /// Train once per mask in a grid and tabulate the final metric.
    AblateMask(AblateMaskArgs),
    /// Train over a (Mel count x setting) grid and tabulate final metrics.
    AblateMels(AblateMelsArgs),
    /// Export learned-basis analyses (bank weights, importance curves, kernel DFTs).
    Inspect(InspectArgs),
    /// Run every finite-difference gradient suite.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Task: kws or asr.
    #[arg(long)]
    pub task: Option<String>,

    /// Clips per class (KWS) or total utterances (ASR).
    #[arg(long, value_name = "N")]
    pub n_per_class: Option<usize>,

    /// Directory for manifest.csv (and clips/ when --write-wavs).
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,

    /// Also render WAV files and reference them from the manifest instead
    /// of synthesis recipes.
    #[arg(long)]
    pub write_wavs: bool,
}

#[derive(Debug, Args, Default, Clone)]
pub struct TrainKnobs {
    /// Task: kws or asr.
    #[arg(long)]
    pub task: Option<String>,

    /// Front-end trainability setting: A, B, C, or D.
    #[arg(long)]
    pub setting: Option<String>,

    /// Mel bank parameterization: freeform or constrained.
    #[arg(long)]
    pub mel_style: Option<String>,

    /// Mel bank initialization: triangular or random.
    #[arg(long)]
    pub mel_init: Option<String>,

    /// Number of Mel filters.
    #[arg(long, value_name = "N")]
    pub n_mels: Option<usize>,

    /// STFT bins to zero, e.g. `25-49,216-240`; `none` disables.
    #[arg(long, value_name = "RANGES")]
    pub mask: Option<String>,

    /// Learning rate shared by all parameter groups.
    #[arg(long, value_name = "LR")]
    pub lr: Option<f64>,

    /// Learning-rate override for the Mel group.
    #[arg(long = "lr-mel", value_name = "LR")]
    pub lr_mel: Option<f64>,

    /// Learning-rate override for the STFT group.
    #[arg(long = "lr-stft", value_name = "LR")]
    pub lr_stft: Option<f64>,

    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,

    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,

    /// LSTM width for the phoneme task.
    #[arg(long, value_name = "N")]
    pub lstm_hidden: Option<usize>,

    /// Dataset manifest; when absent a toy dataset is synthesized in memory.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    /// Toy dataset size when no manifest is given.
    #[arg(long, value_name = "N")]
    pub n_per_class: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub knobs: TrainKnobs,

    /// Write the epoch report CSV here as well as to stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Write per-epoch checkpoints and final.csv here.
    #[arg(long, value_name = "DIR")]
    pub ckpt_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Task: kws or asr.
    #[arg(long)]
    pub task: Option<String>,

    /// Parameter bank file (a train checkpoint).
    #[arg(long, value_name = "FILE")]
    pub params: PathBuf,

    /// Dataset manifest to evaluate on.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,

    /// STFT bins to zero during evaluation.
    #[arg(long, value_name = "RANGES")]
    pub mask: Option<String>,

    /// Which clips to score: all, train, or eval (the 80/20 hash split).
    #[arg(long, default_value = "all")]
    pub split: String,
}

#[derive(Debug, Args)]
pub struct AblateMaskArgs {
    #[command(flatten)]
    pub knobs: TrainKnobs,

    /// Comma-separated mask grid; join multi-interval masks with `+`
    /// (e.g. `25-49,25-74,216-240,191-240,none`).
    #[arg(long, value_name = "GRID")]
    pub masks: String,

    /// Write the result table here as well as to stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateMelsArgs {
    #[command(flatten)]
    pub knobs: TrainKnobs,

    /// Comma-separated Mel counts.
    #[arg(long, value_name = "GRID", default_value = "10,20,30,40")]
    pub n_mels_grid: String,

    /// Comma-separated settings.
    #[arg(long, value_name = "GRID", default_value = "A,B,C,D")]
    pub settings: String,

    /// Write the result table here as well as to stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Parameter bank file to analyze.
    #[arg(long, value_name = "FILE")]
    pub params: PathBuf,

    /// Directory for the exported CSVs.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,

    /// STFT bin whose kernel DFT is exported.
    #[arg(long, value_name = "BIN", default_value_t = 25)]
    pub bin: usize,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {}
