//! Scratch calibration probe (run with --ignored --nocapture).

use specfront::optim::TrainSetting;
use specfront::signal_io::{synth_toy_dataset, Task};
use specfront::trainer::{train_kws, TrainConfig};
use std::time::Instant;

#[test]
#[ignore]
fn probe_kws_settings() {
    for setting in [TrainSetting::A, TrainSetting::B, TrainSetting::C, TrainSetting::D] {
        for seed in [0u64, 1, 2] {
            let (manifest, clips) = synth_toy_dataset(Task::Kws, 20, seed).unwrap();
            let config = TrainConfig {
                task: Task::Kws,
                setting,
                n_mels: 10,
                epochs: 12,
                batch_size: 20,
                seed,
                ..TrainConfig::default()
            };
            let t0 = Instant::now();
            let out = train_kws(&config, &manifest, &clips, None).unwrap();
            let accs: Vec<f64> = out.reports.iter().map(|r| r.metric).collect();
            println!(
                "setting {setting} seed {seed}: final {:.1}% wall {:.1}s accs {:?}",
                accs.last().unwrap(),
                t0.elapsed().as_secs_f64(),
                accs.iter().map(|a| (a * 10.0).round() / 10.0).collect::<Vec<_>>()
            );
        }
    }
}
