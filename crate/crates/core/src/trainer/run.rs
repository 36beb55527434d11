//! Training loops: batch assembly, parallel clip passes, fixed-order
//! gradient reduction, Adam updates with per-setting freezes, and per-epoch
//! evaluation.

use super::pipeline::{
    asr_eval_decode, asr_train_pass, kws_eval_logits, kws_train_pass, precompute_mags,
    AsrClipGrads, AsrModel, ClipInput, GradWants, KwsClipGrads, KwsModel,
};
use super::sampler::{split_train_eval, UniformSampler, WeightedSampler};
use super::{EpochReport, TrainConfig};
use crate::error::{Error, Result};
use crate::frontend::{hz_to_mel, MaskSpec, MelParamGrads, MelStyle, Spectrogram, TriangleShape};
use crate::losses::{levenshtein, CtcTarget};
use crate::mat::Mat;
use crate::optim::{Adam, AdamConfig, ParamGroup};
use crate::signal_io::{ClipLabel, DatasetManifest, Task, WaveformClip};
use crate::HOP;
use rayon::prelude::*;
use std::time::Instant;

/// Final model plus the per-epoch log.
#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub reports: Vec<EpochReport>,
    /// Training clips dropped because no CTC alignment fits their frames.
    pub skipped_infeasible: usize,
}

/// Callback invoked after every epoch (checkpointing hook).
pub type EpochHook<'a, M> = &'a mut dyn FnMut(usize, &M, &EpochReport) -> Result<()>;

fn build_adam(config: &TrainConfig) -> Adam {
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    });
    if let Some(lr) = config.lr_mel {
        adam.set_group_lr(ParamGroup::Mel, lr);
    }
    if let Some(lr) = config.lr_stft {
        adam.set_group_lr(ParamGroup::Stft, lr);
    }
    adam
}

fn abort(epoch: usize, step: usize, err: Error) -> Error {
    Error::TrainAbort {
        epoch,
        step,
        reason: err.to_string(),
    }
}

fn mel_max() -> f64 {
    hz_to_mel(crate::FMAX_HZ)
}

/// Accumulator for Mel parameter gradients across a batch.
enum MelGradAcc {
    FreeForm(Mat),
    Shape { centers: Vec<f64>, raws: Vec<f64> },
}

impl MelGradAcc {
    fn new(style: MelStyle, n_mels: usize, n_bins: usize) -> Self {
        match style {
            MelStyle::FreeForm => MelGradAcc::FreeForm(Mat::zeros(n_mels, n_bins)),
            MelStyle::ShapeConstrained => MelGradAcc::Shape {
                centers: vec![0.0; n_mels],
                raws: vec![0.0; n_mels],
            },
        }
    }

    fn add(&mut self, grads: &MelParamGrads) {
        match (self, grads) {
            (MelGradAcc::FreeForm(acc), MelParamGrads::FreeForm(g)) => acc.add_assign(g),
            (MelGradAcc::Shape { centers, raws }, MelParamGrads::Shape { d_center_mel, d_raw_width }) => {
                for (a, b) in centers.iter_mut().zip(d_center_mel.iter()) {
                    *a += b;
                }
                for (a, b) in raws.iter_mut().zip(d_raw_width.iter()) {
                    *a += b;
                }
            }
            _ => panic!("mixed mel gradient styles in one batch"),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            MelGradAcc::FreeForm(acc) => acc.scale(s),
            MelGradAcc::Shape { centers, raws } => {
                for v in centers.iter_mut() {
                    *v *= s;
                }
                for v in raws.iter_mut() {
                    *v *= s;
                }
            }
        }
    }
}

/// Apply one Adam step to the Mel bank and enforce its domain constraints:
/// free-form weights clamp to `[0, 1]`, constrained centers clamp to the
/// mel axis, and constrained banks re-materialize their weights.
fn update_mel(
    adam: &mut Adam,
    mel: &mut crate::frontend::MelFilterBank,
    acc: &MelGradAcc,
) -> Result<()> {
    match acc {
        MelGradAcc::FreeForm(g) => {
            adam.update_mat("mel.weights", ParamGroup::Mel, &mut mel.weights, g)?;
            mel.weights.clamp_in_place(0.0, 1.0);
        }
        MelGradAcc::Shape { centers: gc, raws: gr } => {
            let shape = mel.shape.as_mut().expect("constrained bank has shape");
            let mut centers: Vec<f64> = shape.iter().map(|t| t.center_mel).collect();
            let mut raws: Vec<f64> = shape.iter().map(|t| t.raw_width).collect();
            adam.update("mel.centers", ParamGroup::Mel, &mut centers, gc)?;
            adam.update("mel.raw_widths", ParamGroup::Mel, &mut raws, gr)?;
            let hi = mel_max();
            *shape = centers
                .iter()
                .zip(raws.iter())
                .map(|(&c, &r)| TriangleShape {
                    center_mel: c.clamp(0.0, hi),
                    raw_width: r,
                })
                .collect();
            mel.rematerialize();
        }
    }
    Ok(())
}

struct SplitIndices {
    train: Vec<usize>,
    eval: Vec<usize>,
}

fn split_dataset(manifest: &DatasetManifest, clips: &[WaveformClip]) -> Result<SplitIndices> {
    if manifest.len() != clips.len() {
        return Err(Error::Config(format!(
            "manifest lists {} entries but {} clips were loaded",
            manifest.len(),
            clips.len()
        )));
    }
    let ids: Vec<String> = manifest.entries.iter().map(|(s, _)| s.id()).collect();
    let (train, eval) = split_train_eval(&ids);
    if train.is_empty() || eval.is_empty() {
        return Err(Error::Config(format!(
            "degenerate split: {} train / {} eval clips; use a larger dataset",
            train.len(),
            eval.len()
        )));
    }
    Ok(SplitIndices { train, eval })
}

fn kws_labels(clips: &[WaveformClip]) -> Result<Vec<usize>> {
    clips
        .iter()
        .map(|c| match &c.label {
            ClipLabel::Class(k) => Ok(*k),
            other => Err(Error::Config(format!(
                "KWS training needs class labels, got {other:?}"
            ))),
        })
        .collect()
}

fn asr_targets(clips: &[WaveformClip]) -> Result<Vec<CtcTarget>> {
    clips
        .iter()
        .map(|c| match &c.label {
            ClipLabel::Phonemes(seq) => CtcTarget::new(seq.clone()),
            other => Err(Error::Config(format!(
                "ASR training needs phoneme labels, got {other:?}"
            ))),
        })
        .collect()
}

/// Train the keyword-spotting model.
///
/// Batch items run in parallel worker lanes; the gradient reduction walks
/// the batch in index order, so results are independent of scheduling. When
/// the STFT stage is frozen, masked magnitude spectrograms are computed once
/// up front and reused every step.
pub fn train_kws(
    config: &TrainConfig,
    manifest: &DatasetManifest,
    clips: &[WaveformClip],
    mut on_epoch: Option<EpochHook<'_, KwsModel>>,
) -> Result<TrainOutcome<KwsModel>> {
    if config.task != Task::Kws || manifest.task != Task::Kws {
        return Err(Error::Config("train_kws called with a non-KWS config".into()));
    }
    let n_classes = manifest.class_names.len();
    let labels = kws_labels(clips)?;
    let split = split_dataset(manifest, clips)?;

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for &i in &split.train {
        per_class[labels[i]].push(i);
    }
    let mut sampler = WeightedSampler::new(per_class, config.seed ^ 0x73616d70)?;

    let mut model = KwsModel::build(
        config.mel_style,
        config.mel_init,
        config.n_mels,
        n_classes,
        config.seed,
        config.setting.mel_trainable(),
        config.setting.stft_trainable(),
    )?;
    let mut adam = build_adam(config);
    let wants = GradWants {
        mel: config.setting.mel_trainable(),
        stft: config.setting.stft_trainable(),
    };

    let cached: Option<Vec<Spectrogram>> = if wants.stft {
        None
    } else {
        Some(precompute_mags(clips, &model.stft, &config.mask)?)
    };

    let steps_per_epoch = split.train.len().div_ceil(config.batch_size).max(1);
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for step in 0..steps_per_epoch {
            let batch: Vec<usize> = (0..config.batch_size)
                .map(|_| sampler.next_index())
                .collect();
            let results: Result<Vec<KwsClipGrads>> = batch
                .par_iter()
                .map(|&i| {
                    kws_train_pass(&model, input_for(i, &cached, clips), &config.mask, labels[i], wants)
                })
                .collect();
            let results = results.map_err(|e| abort(epoch, step, e))?;

            let n = results.len() as f64;
            let mut g_head_w = Mat::zeros(model.head.weight.rows(), model.head.weight.cols());
            let mut g_head_b = vec![0.0; model.head.bias.len()];
            let mut g_mel = wants
                .mel
                .then(|| MelGradAcc::new(model.mel.style, model.mel.n_mels, model.mel.n_bins));
            let mut g_real = wants
                .stft
                .then(|| Mat::zeros(model.stft.real.rows(), model.stft.real.cols()));
            let mut g_imag = wants
                .stft
                .then(|| Mat::zeros(model.stft.imag.rows(), model.stft.imag.cols()));
            let mut batch_loss = 0.0;
            for r in &results {
                if !r.loss.is_finite() {
                    return Err(abort(
                        epoch,
                        step,
                        Error::InvalidArgument(format!("non-finite loss {}", r.loss)),
                    ));
                }
                batch_loss += r.loss;
                g_head_w.add_assign(&r.d_head_weight);
                for (a, b) in g_head_b.iter_mut().zip(r.d_head_bias.iter()) {
                    *a += b;
                }
                if let (Some(acc), Some(g)) = (g_mel.as_mut(), r.mel.as_ref()) {
                    acc.add(g);
                }
                if let (Some(acc), Some(g)) = (g_real.as_mut(), r.d_stft_real.as_ref()) {
                    acc.add_assign(g);
                }
                if let (Some(acc), Some(g)) = (g_imag.as_mut(), r.d_stft_imag.as_ref()) {
                    acc.add_assign(g);
                }
            }
            batch_loss /= n;
            loss_sum += batch_loss;
            g_head_w.scale(1.0 / n);
            for v in g_head_b.iter_mut() {
                *v /= n;
            }
            if let Some(acc) = g_mel.as_mut() {
                acc.scale(1.0 / n);
            }
            if let Some(acc) = g_real.as_mut() {
                acc.scale(1.0 / n);
            }
            if let Some(acc) = g_imag.as_mut() {
                acc.scale(1.0 / n);
            }

            adam.begin_step();
            adam.update_mat("head.weight", ParamGroup::Classifier, &mut model.head.weight, &g_head_w)
                .map_err(|e| abort(epoch, step, e))?;
            adam.update("head.bias", ParamGroup::Classifier, &mut model.head.bias, &g_head_b)
                .map_err(|e| abort(epoch, step, e))?;
            if let Some(acc) = &g_mel {
                update_mel(&mut adam, &mut model.mel, acc).map_err(|e| abort(epoch, step, e))?;
            }
            if let (Some(gr), Some(gi)) = (&g_real, &g_imag) {
                adam.update_mat("stft.real", ParamGroup::Stft, &mut model.stft.real, gr)
                    .map_err(|e| abort(epoch, step, e))?;
                adam.update_mat("stft.imag", ParamGroup::Stft, &mut model.stft.imag, gi)
                    .map_err(|e| abort(epoch, step, e))?;
            }
        }

        let correct: usize = split
            .eval
            .par_iter()
            .map(|&i| {
                let logits = kws_eval_logits(&model, input_for(i, &cached, clips), &config.mask)?;
                let pred = argmax(&logits);
                Ok(usize::from(pred == labels[i]))
            })
            .sum::<Result<usize>>()?;
        let accuracy = 100.0 * correct as f64 / split.eval.len() as f64;

        let report = EpochReport {
            epoch,
            train_loss: loss_sum / steps_per_epoch as f64,
            metric: accuracy,
            wall_secs: started.elapsed().as_secs_f64(),
        };
        if let Some(hook) = on_epoch.as_mut() {
            hook(epoch, &model, &report)?;
        }
        reports.push(report);
    }

    Ok(TrainOutcome {
        model,
        reports,
        skipped_infeasible: 0,
    })
}

/// Train the phoneme-sequence model. Clips whose frame count cannot fit any
/// CTC alignment of their target are skipped for training (and counted),
/// but still evaluated.
pub fn train_asr(
    config: &TrainConfig,
    manifest: &DatasetManifest,
    clips: &[WaveformClip],
    mut on_epoch: Option<EpochHook<'_, AsrModel>>,
) -> Result<TrainOutcome<AsrModel>> {
    if config.task != Task::Asr || manifest.task != Task::Asr {
        return Err(Error::Config("train_asr called with a non-ASR config".into()));
    }
    let targets = asr_targets(clips)?;
    let split = split_dataset(manifest, clips)?;

    let feasible: Vec<usize> = split
        .train
        .iter()
        .copied()
        .filter(|&i| clips[i].samples.len() / HOP + 1 >= targets[i].min_frames())
        .collect();
    let skipped_infeasible = split.train.len() - feasible.len();
    let mut sampler = UniformSampler::new(feasible, config.seed ^ 0x73616d70)?;

    let mut model = AsrModel::build(
        config.mel_style,
        config.mel_init,
        config.n_mels,
        config.lstm_hidden,
        config.seed,
        config.setting.mel_trainable(),
        config.setting.stft_trainable(),
    )?;
    let mut adam = build_adam(config);
    let wants = GradWants {
        mel: config.setting.mel_trainable(),
        stft: config.setting.stft_trainable(),
    };

    let cached: Option<Vec<Spectrogram>> = if wants.stft {
        None
    } else {
        Some(precompute_mags(clips, &model.stft, &config.mask)?)
    };

    let steps_per_epoch = split.train.len().div_ceil(config.batch_size).max(1);
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for step in 0..steps_per_epoch {
            let batch: Vec<usize> = (0..config.batch_size)
                .map(|_| sampler.next_index())
                .collect();
            let results: Result<Vec<AsrClipGrads>> = batch
                .par_iter()
                .map(|&i| {
                    asr_train_pass(&model, input_for(i, &cached, clips), &config.mask, &targets[i], wants)
                })
                .collect();
            let results = results.map_err(|e| abort(epoch, step, e))?;

            let n = results.len() as f64;
            let mut g_head_w = Mat::zeros(model.head.weight.rows(), model.head.weight.cols());
            let mut g_head_b = vec![0.0; model.head.bias.len()];
            let mut g_lstm_w = Mat::zeros(model.lstm.weight.rows(), model.lstm.weight.cols());
            let mut g_lstm_b = vec![0.0; model.lstm.bias.len()];
            let mut g_mel = wants
                .mel
                .then(|| MelGradAcc::new(model.mel.style, model.mel.n_mels, model.mel.n_bins));
            let mut g_real = wants
                .stft
                .then(|| Mat::zeros(model.stft.real.rows(), model.stft.real.cols()));
            let mut g_imag = wants
                .stft
                .then(|| Mat::zeros(model.stft.imag.rows(), model.stft.imag.cols()));
            let mut batch_loss = 0.0;
            for r in &results {
                if !r.loss.is_finite() {
                    return Err(abort(
                        epoch,
                        step,
                        Error::InvalidArgument(format!("non-finite loss {}", r.loss)),
                    ));
                }
                batch_loss += r.loss;
                g_head_w.add_assign(&r.d_head_weight);
                for (a, b) in g_head_b.iter_mut().zip(r.d_head_bias.iter()) {
                    *a += b;
                }
                g_lstm_w.add_assign(&r.d_lstm_weight);
                for (a, b) in g_lstm_b.iter_mut().zip(r.d_lstm_bias.iter()) {
                    *a += b;
                }
                if let (Some(acc), Some(g)) = (g_mel.as_mut(), r.mel.as_ref()) {
                    acc.add(g);
                }
                if let (Some(acc), Some(g)) = (g_real.as_mut(), r.d_stft_real.as_ref()) {
                    acc.add_assign(g);
                }
                if let (Some(acc), Some(g)) = (g_imag.as_mut(), r.d_stft_imag.as_ref()) {
                    acc.add_assign(g);
                }
            }
            batch_loss /= n;
            loss_sum += batch_loss;
            g_head_w.scale(1.0 / n);
            g_lstm_w.scale(1.0 / n);
            for v in g_head_b.iter_mut() {
                *v /= n;
            }
            for v in g_lstm_b.iter_mut() {
                *v /= n;
            }
            if let Some(acc) = g_mel.as_mut() {
                acc.scale(1.0 / n);
            }
            if let Some(acc) = g_real.as_mut() {
                acc.scale(1.0 / n);
            }
            if let Some(acc) = g_imag.as_mut() {
                acc.scale(1.0 / n);
            }

            adam.begin_step();
            adam.update_mat("head.weight", ParamGroup::Classifier, &mut model.head.weight, &g_head_w)
                .map_err(|e| abort(epoch, step, e))?;
            adam.update("head.bias", ParamGroup::Classifier, &mut model.head.bias, &g_head_b)
                .map_err(|e| abort(epoch, step, e))?;
            adam.update_mat("lstm.weight", ParamGroup::Classifier, &mut model.lstm.weight, &g_lstm_w)
                .map_err(|e| abort(epoch, step, e))?;
            adam.update("lstm.bias", ParamGroup::Classifier, &mut model.lstm.bias, &g_lstm_b)
                .map_err(|e| abort(epoch, step, e))?;
            if let Some(acc) = &g_mel {
                update_mel(&mut adam, &mut model.mel, acc).map_err(|e| abort(epoch, step, e))?;
            }
            if let (Some(gr), Some(gi)) = (&g_real, &g_imag) {
                adam.update_mat("stft.real", ParamGroup::Stft, &mut model.stft.real, gr)
                    .map_err(|e| abort(epoch, step, e))?;
                adam.update_mat("stft.imag", ParamGroup::Stft, &mut model.stft.imag, gi)
                    .map_err(|e| abort(epoch, step, e))?;
            }
        }

        let (dist, ref_len) = split
            .eval
            .par_iter()
            .map(|&i| -> Result<(usize, usize)> {
                let hyp = asr_eval_decode(&model, input_for(i, &cached, clips), &config.mask)?;
                Ok((levenshtein(&hyp, &targets[i].symbols), targets[i].symbols.len()))
            })
            .try_reduce(|| (0usize, 0usize), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
        let per = 100.0 * dist as f64 / ref_len as f64;

        let report = EpochReport {
            epoch,
            train_loss: loss_sum / steps_per_epoch as f64,
            metric: per,
            wall_secs: started.elapsed().as_secs_f64(),
        };
        if let Some(hook) = on_epoch.as_mut() {
            hook(epoch, &model, &report)?;
        }
        reports.push(report);
    }

    Ok(TrainOutcome {
        model,
        reports,
        skipped_infeasible,
    })
}

fn input_for<'a>(
    i: usize,
    cache: &'a Option<Vec<Spectrogram>>,
    clips: &'a [WaveformClip],
) -> ClipInput<'a> {
    match cache {
        Some(mags) => ClipInput::Cached(&mags[i]),
        None => ClipInput::Raw(&clips[i].samples),
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Top-1 accuracy percent of a KWS model over the indexed clips.
pub fn evaluate_kws(
    model: &KwsModel,
    clips: &[WaveformClip],
    indices: &[usize],
    mask: &MaskSpec,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let correct: usize = indices
        .par_iter()
        .map(|&i| {
            let label = match &clips[i].label {
                ClipLabel::Class(k) => *k,
                other => {
                    return Err(Error::Config(format!(
                        "KWS evaluation needs class labels, got {other:?}"
                    )))
                }
            };
            let logits = kws_eval_logits(model, ClipInput::Raw(&clips[i].samples), mask)?;
            Ok(usize::from(argmax(&logits) == label))
        })
        .sum::<Result<usize>>()?;
    Ok(100.0 * correct as f64 / indices.len() as f64)
}

/// Corpus phone error rate percent of an ASR model over the indexed clips
/// (total edit distance over total reference length).
pub fn evaluate_asr(
    model: &AsrModel,
    clips: &[WaveformClip],
    indices: &[usize],
    mask: &MaskSpec,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let (dist, ref_len) = indices
        .par_iter()
        .map(|&i| {
            let reference = match &clips[i].label {
                ClipLabel::Phonemes(seq) => seq,
                other => {
                    return Err(Error::Config(format!(
                        "ASR evaluation needs phoneme labels, got {other:?}"
                    )))
                }
            };
            let hyp = asr_eval_decode(model, ClipInput::Raw(&clips[i].samples), mask)?;
            Ok((levenshtein(&hyp, reference), reference.len()))
        })
        .try_reduce(|| (0usize, 0usize), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    if ref_len == 0 {
        return Err(Error::Config("empty references in evaluation set".into()));
    }
    Ok(100.0 * dist as f64 / ref_len as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::synth_toy_dataset;
    use crate::trainer::MelInit;

    fn tiny_kws_config() -> TrainConfig {
        TrainConfig {
            task: Task::Kws,
            n_mels: 10,
            epochs: 1,
            batch_size: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (manifest, clips) = synth_toy_dataset(Task::Kws, 12, 0).unwrap();
        let config = TrainConfig {
            epochs: 0,
            ..tiny_kws_config()
        };
        let outcome = train_kws(&config, &manifest, &clips, None).unwrap();
        let fresh = KwsModel::build(
            config.mel_style,
            MelInit::Triangular,
            config.n_mels,
            12,
            config.seed,
            false,
            false,
        )
        .unwrap();
        assert_eq!(outcome.model.stft.real, fresh.stft.real);
        assert_eq!(outcome.model.mel.weights, fresh.mel.weights);
        assert_eq!(outcome.model.head.weight, fresh.head.weight);
        assert!(outcome.reports.is_empty());
    }

    #[test]
    fn one_epoch_trains_and_reports() {
        let (manifest, clips) = synth_toy_dataset(Task::Kws, 12, 0).unwrap();
        let config = tiny_kws_config();
        let outcome = train_kws(&config, &manifest, &clips, None).unwrap();
        assert_eq!(outcome.reports.len(), 1);
        let r = &outcome.reports[0];
        assert!(r.train_loss.is_finite());
        assert!((0.0..=100.0).contains(&r.metric));
    }

    #[test]
    fn identical_clips_give_identical_losses() {
        let (_, clips) = synth_toy_dataset(Task::Kws, 1, 0).unwrap();
        let model =
            KwsModel::build(MelStyle::FreeForm, MelInit::Triangular, 10, 12, 0, false, false)
                .unwrap();
        let mask = MaskSpec::none();
        let wants = GradWants { mel: false, stft: false };
        let a = kws_train_pass(&model, ClipInput::Raw(&clips[0].samples), &mask, 0, wants)
            .unwrap()
            .loss;
        let b = kws_train_pass(&model, ClipInput::Raw(&clips[0].samples), &mask, 0, wants)
            .unwrap()
            .loss;
        assert_eq!(a, b);
    }

    #[test]
    fn constant_class_predictor_scores_one_over_c() {
        // A zero model always predicts class 0.
        let (manifest, clips) = synth_toy_dataset(Task::Kws, 12, 0).unwrap();
        let model =
            KwsModel::build(MelStyle::FreeForm, MelInit::Triangular, 10, 12, 0, false, false)
                .unwrap();
        let all: Vec<usize> = (0..clips.len()).collect();
        let acc = evaluate_kws(&model, &clips, &all, &MaskSpec::none()).unwrap();
        assert!((acc - 100.0 / 12.0).abs() < 1e-9, "accuracy {acc}");
        drop(manifest);
    }

    #[test]
    fn corpus_per_is_length_weighted_mean() {
        let (_, clips) = synth_toy_dataset(Task::Asr, 10, 0).unwrap();
        let model = AsrModel::build(
            MelStyle::FreeForm,
            MelInit::Triangular,
            10,
            8,
            0,
            false,
            false,
        )
        .unwrap();
        let all: Vec<usize> = (0..clips.len()).collect();
        let corpus = evaluate_asr(&model, &clips, &all, &MaskSpec::none()).unwrap();
        // Length-weighted mean of per-utterance PERs equals the corpus PER.
        let mut weighted = 0.0;
        let mut total_len = 0.0;
        for clip in &clips {
            let reference = match &clip.label {
                ClipLabel::Phonemes(seq) => seq.clone(),
                _ => unreachable!(),
            };
            let hyp =
                asr_eval_decode(&model, ClipInput::Raw(&clip.samples), &MaskSpec::none()).unwrap();
            let per = crate::losses::phone_error_rate(&hyp, &reference).unwrap();
            weighted += per * reference.len() as f64;
            total_len += reference.len() as f64;
        }
        assert!((corpus - weighted / total_len).abs() < 1e-9);
    }

    #[test]
    fn untrained_asr_model_has_high_per() {
        let (manifest, clips) = synth_toy_dataset(Task::Asr, 20, 0).unwrap();
        let config = TrainConfig {
            task: Task::Asr,
            n_mels: 10,
            lstm_hidden: 8,
            epochs: 0,
            ..TrainConfig::default()
        };
        let outcome = train_asr(&config, &manifest, &clips, None).unwrap();
        let all: Vec<usize> = (0..clips.len()).collect();
        let per = evaluate_asr(&outcome.model, &clips, &all, &MaskSpec::none()).unwrap();
        assert!(per > 50.0, "untrained PER {per}");
    }
}
