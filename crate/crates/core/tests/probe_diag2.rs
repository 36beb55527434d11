//! Per-frame posterior inspection after ASR training (run --ignored).

use specfront::frontend::{mel_forward, MaskSpec};
use specfront::losses::{ctc_loss, log_softmax_rows, CtcTarget, ASR_BLANK};
use specfront::optim::TrainSetting;
use specfront::signal_io::{synth_toy_dataset, ClipLabel, Task};
use specfront::trainer::{precompute_mags, train_asr, TrainConfig};

#[test]
#[ignore]
fn probe_asr_frames() {
    let seed = 0u64;
    let (manifest, clips) = synth_toy_dataset(Task::Asr, 400, seed).unwrap();
    let config = TrainConfig {
        task: Task::Asr,
        setting: TrainSetting::B,
        n_mels: 40,
        lstm_hidden: 64,
        epochs: 120,
        batch_size: 5,
        seed,
        ..TrainConfig::default()
    };
    let out = train_asr(&config, &manifest, &clips, None).unwrap();
    let model = &out.model;

    for i in [0usize, 1] {
        let mags = precompute_mags(
            std::slice::from_ref(&clips[i]),
            &model.stft,
            &MaskSpec::none(),
        )
        .unwrap();
        let xf = mel_forward(&mags[0], &model.mel).unwrap();
        let (hidden, _) = model.lstm.forward(&xf.frames).unwrap();
        let logits = model.head.forward_mat(&hidden).unwrap();
        let lp = log_softmax_rows(&logits);
        let reference = match &clips[i].label {
            ClipLabel::Phonemes(seq) => seq.clone(),
            _ => unreachable!(),
        };
        let target = CtcTarget::new(reference.clone()).unwrap();
        let (loss, _) = ctc_loss(&lp, &target, ASR_BLANK).unwrap();
        println!("clip {i}: ref {reference:?} T={} loss {loss:.3}", lp.rows());
        for t in (0..lp.rows()).step_by(8) {
            let row = lp.row(t);
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap());
            let top: Vec<String> = idx[..3]
                .iter()
                .map(|&c| {
                    let name = if c == ASR_BLANK { "_".to_string() } else { c.to_string() };
                    format!("{name}:{:.2}", row[c].exp())
                })
                .collect();
            println!("  t={t}: {}", top.join(" "));
        }
    }
}
