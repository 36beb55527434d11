//! End-to-end training and evaluation loops for the two toy tasks.

pub mod pipeline;
pub mod run;
pub mod sampler;

pub use pipeline::{
    asr_eval_decode, asr_train_pass, kws_eval_logits, kws_train_pass, precompute_mags, AsrModel,
    ClipInput, GradWants, KwsModel, MelInit,
};
pub use run::{evaluate_asr, evaluate_kws, train_asr, train_kws, TrainOutcome};
pub use sampler::{split_train_eval, UniformSampler, WeightedSampler};

use crate::frontend::{MaskSpec, MelStyle};
use crate::optim::TrainSetting;
use crate::signal_io::Task;

/// Everything a training run needs to know. The defaults are the toy-scale
/// values; paper-scale settings (hundreds of epochs, batch 100) are plain
/// config changes.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub task: Task,
    pub setting: TrainSetting,
    pub mel_style: MelStyle,
    pub mel_init: MelInit,
    pub n_mels: usize,
    pub mask: MaskSpec,
    pub lr: f64,
    /// Optional per-group learning-rate overrides.
    pub lr_mel: Option<f64>,
    pub lr_stft: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// LSTM width for the sequence task.
    pub lstm_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            task: Task::Kws,
            setting: TrainSetting::A,
            mel_style: MelStyle::FreeForm,
            mel_init: MelInit::Triangular,
            n_mels: 40,
            mask: MaskSpec::none(),
            lr: 1e-3,
            lr_mel: None,
            lr_stft: None,
            epochs: 30,
            batch_size: 20,
            seed: 0,
            lstm_hidden: 256,
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    /// KWS: top-1 accuracy percent on the held-out split.
    /// ASR: corpus phone error rate percent.
    pub metric: f64,
    /// Informational only; never part of the deterministic CSV output.
    pub wall_secs: f64,
}
