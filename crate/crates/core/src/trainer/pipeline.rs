//! Model bundles (front-end + classifier) and single-clip passes.
//!
//! Every pass is a pure function of (parameters, input), so batches can be
//! evaluated on worker threads and reduced in index order without changing
//! any result.

use crate::bankfile::BankFile;
use crate::error::{Error, Result};
use crate::frontend::{
    frame_count, init_mel_constrained, init_mel_freeform, init_mel_random,
    init_stft_kernels_default, make_hann_window, mask_in_place, materialize_constrained,
    mel_backward, mel_forward, stft_backward, stft_forward, MaskSpec, MelFilterBank,
    MelParamGrads, MelStyle, Spectrogram, StftKernelBank, TriangleShape,
};
use crate::losses::{ctc_loss, greedy_ctc_decode, log_softmax_rows, log_softmax_rows_backward,
    softmax_xent, CtcTarget, ASR_BLANK, ASR_CLASSES};
use crate::mat::Mat;
use crate::models::{LinearHead, LstmLayer};
use crate::{HOP, N_BINS, N_FFT, SAMPLE_RATE_HZ};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How the Mel bank starts out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelInit {
    Triangular,
    /// Uniform[0,1] weights (free-form only).
    Random,
}

/// Raw samples, or a magnitude spectrogram precomputed once because the
/// STFT stage is frozen (the mask, if any, is already applied).
pub enum ClipInput<'a> {
    Raw(&'a [f64]),
    Cached(&'a Spectrogram),
}

/// Which parameter groups need gradients this run.
#[derive(Debug, Clone, Copy)]
pub struct GradWants {
    pub mel: bool,
    pub stft: bool,
}

fn build_mel(
    style: MelStyle,
    init: MelInit,
    n_mels: usize,
    seed: u64,
    trainable: bool,
) -> Result<MelFilterBank> {
    let mut mel = match (style, init) {
        (MelStyle::FreeForm, MelInit::Triangular) => {
            init_mel_freeform(n_mels, crate::FMIN_HZ, crate::FMAX_HZ, N_BINS)?
        }
        (MelStyle::FreeForm, MelInit::Random) => {
            init_mel_random(n_mels, crate::FMIN_HZ, crate::FMAX_HZ, N_BINS, seed)?
        }
        (MelStyle::ShapeConstrained, MelInit::Triangular) => {
            init_mel_constrained(n_mels, crate::FMIN_HZ, crate::FMAX_HZ, N_BINS)?
        }
        (MelStyle::ShapeConstrained, MelInit::Random) => {
            return Err(Error::Config(
                "random init applies to the free-form bank only".into(),
            ))
        }
    };
    mel.trainable = trainable;
    Ok(mel)
}

/// Keyword-spotting model: front-end plus a linear head over the flattened
/// Mel spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct KwsModel {
    pub stft: StftKernelBank,
    pub mel: MelFilterBank,
    pub head: LinearHead,
}

impl KwsModel {
    /// Frames per one-second clip under the production geometry.
    pub fn t_frames() -> usize {
        frame_count(SAMPLE_RATE_HZ as usize, HOP)
    }

    pub fn build(
        style: MelStyle,
        init: MelInit,
        n_mels: usize,
        n_classes: usize,
        seed: u64,
        mel_trainable: bool,
        stft_trainable: bool,
    ) -> Result<Self> {
        let mut stft = init_stft_kernels_default();
        stft.trainable = stft_trainable;
        let mel = build_mel(style, init, n_mels, seed, mel_trainable)?;
        // Zero head: the untrained model predicts the uniform distribution.
        let head = LinearHead::zeros(n_classes, Self::t_frames() * n_mels);
        Ok(KwsModel { stft, mel, head })
    }

    pub fn n_classes(&self) -> usize {
        self.head.out_dim()
    }

    pub fn to_bank(&self) -> BankFile {
        let mut bank = BankFile::new();
        push_frontend(&mut bank, &self.stft, &self.mel);
        bank.push("head.weight", self.head.weight.clone());
        bank.push("head.bias", Mat::from_vec(1, self.head.bias.len(), self.head.bias.clone()));
        bank
    }

    pub fn from_bank(bank: &BankFile) -> Result<Self> {
        let (stft, mel) = read_frontend(bank)?;
        let weight = bank.require("head.weight")?.clone();
        let bias = bank.require("head.bias")?.as_slice().to_vec();
        if weight.rows() != bias.len() {
            return Err(Error::Parse("head.weight rows != head.bias length".into()));
        }
        Ok(KwsModel {
            stft,
            mel,
            head: LinearHead { weight, bias },
        })
    }
}

/// Phoneme-sequence model: front-end, one LSTM layer, per-frame linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct AsrModel {
    pub stft: StftKernelBank,
    pub mel: MelFilterBank,
    pub lstm: LstmLayer,
    pub head: LinearHead,
}

impl AsrModel {
    pub fn build(
        style: MelStyle,
        init: MelInit,
        n_mels: usize,
        hidden: usize,
        seed: u64,
        mel_trainable: bool,
        stft_trainable: bool,
    ) -> Result<Self> {
        let mut stft = init_stft_kernels_default();
        stft.trainable = stft_trainable;
        let mel = build_mel(style, init, n_mels, seed, mel_trainable)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c73_746d);
        let lstm = LstmLayer::init(n_mels, hidden, &mut rng);
        let head = LinearHead::zeros(ASR_CLASSES, hidden);
        Ok(AsrModel {
            stft,
            mel,
            lstm,
            head,
        })
    }

    pub fn to_bank(&self) -> BankFile {
        let mut bank = BankFile::new();
        push_frontend(&mut bank, &self.stft, &self.mel);
        bank.push("lstm.weight", self.lstm.weight.clone());
        bank.push("lstm.bias", Mat::from_vec(1, self.lstm.bias.len(), self.lstm.bias.clone()));
        bank.push("head.weight", self.head.weight.clone());
        bank.push("head.bias", Mat::from_vec(1, self.head.bias.len(), self.head.bias.clone()));
        bank
    }

    pub fn from_bank(bank: &BankFile) -> Result<Self> {
        let (stft, mel) = read_frontend(bank)?;
        let lstm_weight = bank.require("lstm.weight")?.clone();
        let lstm_bias = bank.require("lstm.bias")?.as_slice().to_vec();
        if lstm_weight.rows() % 4 != 0 || lstm_weight.rows() != lstm_bias.len() {
            return Err(Error::Parse("inconsistent lstm sections".into()));
        }
        let hidden = lstm_weight.rows() / 4;
        let input_size = lstm_weight
            .cols()
            .checked_sub(hidden)
            .ok_or_else(|| Error::Parse("lstm.weight narrower than hidden size".into()))?;
        let weight = bank.require("head.weight")?.clone();
        let bias = bank.require("head.bias")?.as_slice().to_vec();
        Ok(AsrModel {
            stft,
            mel,
            lstm: LstmLayer {
                input_size,
                hidden_size: hidden,
                weight: lstm_weight,
                bias: lstm_bias,
            },
            head: LinearHead { weight, bias },
        })
    }
}

fn push_frontend(bank: &mut BankFile, stft: &StftKernelBank, mel: &MelFilterBank) {
    bank.push("stft.real", stft.real.clone());
    bank.push("stft.imag", stft.imag.clone());
    bank.push("mel.weights", mel.weights.clone());
    if let Some(shape) = &mel.shape {
        let centers: Vec<f64> = shape.iter().map(|t| t.center_mel).collect();
        let raws: Vec<f64> = shape.iter().map(|t| t.raw_width).collect();
        bank.push("mel.centers", Mat::from_vec(1, centers.len(), centers));
        bank.push("mel.raw_widths", Mat::from_vec(1, raws.len(), raws));
    }
}

fn read_frontend(bank: &BankFile) -> Result<(StftKernelBank, MelFilterBank)> {
    let real = bank.require("stft.real")?.clone();
    let imag = bank.require("stft.imag")?.clone();
    if real.shape() != (N_BINS, N_FFT) || imag.shape() != (N_BINS, N_FFT) {
        return Err(Error::Parse(format!(
            "stft kernels must be {N_BINS}x{N_FFT}, got {:?}",
            real.shape()
        )));
    }
    let stft = StftKernelBank {
        real,
        imag,
        n_fft: N_FFT,
        hop: HOP,
        window: make_hann_window(N_FFT)?,
        trainable: false,
    };
    let weights = bank.require("mel.weights")?.clone();
    if weights.cols() != N_BINS {
        return Err(Error::Parse(format!(
            "mel.weights must have {N_BINS} columns, got {}",
            weights.cols()
        )));
    }
    let n_mels = weights.rows();
    let mel = match bank.get("mel.centers") {
        Some(centers) => {
            let raws = bank.require("mel.raw_widths")?;
            if centers.len() != n_mels || raws.len() != n_mels {
                return Err(Error::Parse("mel shape sections disagree with weights".into()));
            }
            let shape: Vec<TriangleShape> = centers
                .as_slice()
                .iter()
                .zip(raws.as_slice().iter())
                .map(|(&c, &r)| TriangleShape {
                    center_mel: c,
                    raw_width: r,
                })
                .collect();
            MelFilterBank {
                style: MelStyle::ShapeConstrained,
                weights: materialize_constrained(&shape, N_BINS, crate::FMAX_HZ),
                shape: Some(shape),
                n_mels,
                n_bins: N_BINS,
                fmin_hz: crate::FMIN_HZ,
                fmax_hz: crate::FMAX_HZ,
                trainable: false,
            }
        }
        None => MelFilterBank {
            style: MelStyle::FreeForm,
            weights,
            shape: None,
            n_mels,
            n_bins: N_BINS,
            fmin_hz: crate::FMIN_HZ,
            fmax_hz: crate::FMAX_HZ,
            trainable: false,
        },
    };
    Ok((stft, mel))
}

/// Run the front-end on raw samples: STFT, mask, and the pre-mask cache.
fn front_forward(
    samples: &[f64],
    stft: &StftKernelBank,
    mask: &MaskSpec,
) -> Result<(Spectrogram, crate::frontend::StftCache)> {
    let (mut mag, cache) = stft_forward(samples, stft)?;
    let n_bins = mag.frames.cols();
    mask_in_place(&mut mag.frames, mask, n_bins)?;
    Ok((mag, cache))
}

/// Precompute masked magnitude spectrograms for a frozen STFT stage.
pub fn precompute_mags(
    clips: &[crate::signal_io::WaveformClip],
    stft: &StftKernelBank,
    mask: &MaskSpec,
) -> Result<Vec<Spectrogram>> {
    use rayon::prelude::*;
    clips
        .par_iter()
        .map(|clip| front_forward(&clip.samples, stft, mask).map(|(mag, _)| mag))
        .collect()
}

/// Gradients of one keyword-spotting clip.
pub struct KwsClipGrads {
    pub loss: f64,
    pub d_head_weight: Mat,
    pub d_head_bias: Vec<f64>,
    pub mel: Option<MelParamGrads>,
    pub d_stft_real: Option<Mat>,
    pub d_stft_imag: Option<Mat>,
}

/// Forward + backward through the whole KWS chain for one clip.
pub fn kws_train_pass(
    model: &KwsModel,
    input: ClipInput<'_>,
    mask: &MaskSpec,
    label: usize,
    wants: GradWants,
) -> Result<KwsClipGrads> {
    let computed;
    let (masked, cache) = match input {
        ClipInput::Cached(mag) => (mag, None),
        ClipInput::Raw(samples) => {
            let (mag, cache) = front_forward(samples, &model.stft, mask)?;
            computed = mag;
            (&computed, Some(cache))
        }
    };

    let xf = mel_forward(masked, &model.mel)?;
    let logits = model.head.forward_vec(xf.flatten())?;
    let (loss, d_logits) = softmax_xent(&logits, label)?;
    let (head_grads, d_flat) = model.head.backward_vec(&d_logits, xf.flatten())?;

    let mut mel_param_grads = None;
    let mut d_stft_real = None;
    let mut d_stft_imag = None;
    if wants.mel || wants.stft {
        let upstream = Mat::from_vec(xf.n_frames(), model.mel.n_mels, d_flat);
        let mel_grads = mel_backward(&upstream, masked, &model.mel, wants.stft)?;
        if wants.mel {
            mel_param_grads = Some(mel_grads.params);
        }
        if wants.stft {
            let mut d_mag = mel_grads
                .d_mag
                .expect("requested input grad from mel_backward");
            // Masked columns pass no gradient.
            let n_bins = d_mag.cols();
            mask_in_place(&mut d_mag, mask, n_bins)?;
            let cache = cache.as_ref().ok_or_else(|| {
                Error::ContractViolation(
                    "stft gradients need raw samples, got a cached spectrogram".into(),
                )
            })?;
            let grads = stft_backward(&d_mag, cache, &model.stft, false)?;
            d_stft_real = Some(grads.d_real);
            d_stft_imag = Some(grads.d_imag);
        }
    }

    Ok(KwsClipGrads {
        loss,
        d_head_weight: head_grads.d_weight,
        d_head_bias: head_grads.d_bias,
        mel: mel_param_grads,
        d_stft_real,
        d_stft_imag,
    })
}

/// Logits for one clip (no gradients).
pub fn kws_eval_logits(
    model: &KwsModel,
    input: ClipInput<'_>,
    mask: &MaskSpec,
) -> Result<Vec<f64>> {
    let computed;
    let masked = match input {
        ClipInput::Cached(mag) => mag,
        ClipInput::Raw(samples) => {
            let (mag, _) = front_forward(samples, &model.stft, mask)?;
            computed = mag;
            &computed
        }
    };
    let xf = mel_forward(masked, &model.mel)?;
    model.head.forward_vec(xf.flatten())
}

/// Gradients of one phoneme-sequence clip.
pub struct AsrClipGrads {
    pub loss: f64,
    pub d_head_weight: Mat,
    pub d_head_bias: Vec<f64>,
    pub d_lstm_weight: Mat,
    pub d_lstm_bias: Vec<f64>,
    pub mel: Option<MelParamGrads>,
    pub d_stft_real: Option<Mat>,
    pub d_stft_imag: Option<Mat>,
}

/// Forward + backward through the ASR chain for one clip.
pub fn asr_train_pass(
    model: &AsrModel,
    input: ClipInput<'_>,
    mask: &MaskSpec,
    target: &CtcTarget,
    wants: GradWants,
) -> Result<AsrClipGrads> {
    let computed;
    let (masked, cache) = match input {
        ClipInput::Cached(mag) => (mag, None),
        ClipInput::Raw(samples) => {
            let (mag, cache) = front_forward(samples, &model.stft, mask)?;
            computed = mag;
            (&computed, Some(cache))
        }
    };

    let xf = mel_forward(masked, &model.mel)?;
    let (hidden, lstm_cache) = model.lstm.forward(&xf.frames)?;
    let logits = model.head.forward_mat(&hidden)?;
    let log_probs = log_softmax_rows(&logits);
    let (loss, d_log_probs) = ctc_loss(&log_probs, target, ASR_BLANK)?;
    let d_logits = log_softmax_rows_backward(&d_log_probs, &log_probs)?;
    let (head_grads, d_hidden) = model.head.backward_mat(&d_logits, &hidden)?;
    let (lstm_grads, d_xf) = model.lstm.backward(&d_hidden, &lstm_cache)?;

    let mut mel_param_grads = None;
    let mut d_stft_real = None;
    let mut d_stft_imag = None;
    if wants.mel || wants.stft {
        let mel_grads = mel_backward(&d_xf, masked, &model.mel, wants.stft)?;
        if wants.mel {
            mel_param_grads = Some(mel_grads.params);
        }
        if wants.stft {
            let mut d_mag = mel_grads
                .d_mag
                .expect("requested input grad from mel_backward");
            let n_bins = d_mag.cols();
            mask_in_place(&mut d_mag, mask, n_bins)?;
            let cache = cache.as_ref().ok_or_else(|| {
                Error::ContractViolation(
                    "stft gradients need raw samples, got a cached spectrogram".into(),
                )
            })?;
            let grads = stft_backward(&d_mag, cache, &model.stft, false)?;
            d_stft_real = Some(grads.d_real);
            d_stft_imag = Some(grads.d_imag);
        }
    }

    Ok(AsrClipGrads {
        loss,
        d_head_weight: head_grads.d_weight,
        d_head_bias: head_grads.d_bias,
        d_lstm_weight: lstm_grads.d_weight,
        d_lstm_bias: lstm_grads.d_bias,
        mel: mel_param_grads,
        d_stft_real,
        d_stft_imag,
    })
}

/// Greedy-decoded symbol sequence for one clip.
pub fn asr_eval_decode(
    model: &AsrModel,
    input: ClipInput<'_>,
    mask: &MaskSpec,
) -> Result<Vec<usize>> {
    let computed;
    let masked = match input {
        ClipInput::Cached(mag) => mag,
        ClipInput::Raw(samples) => {
            let (mag, _) = front_forward(samples, &model.stft, mask)?;
            computed = mag;
            &computed
        }
    };
    let xf = mel_forward(masked, &model.mel)?;
    let (hidden, _) = model.lstm.forward(&xf.frames)?;
    let logits = model.head.forward_mat(&hidden)?;
    let log_probs = log_softmax_rows(&logits);
    Ok(greedy_ctc_decode(&log_probs, ASR_BLANK))
}
