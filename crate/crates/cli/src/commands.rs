//! Subcommand implementations.

use crate::args::{
    AblateMaskArgs, AblateMelsArgs, EvalArgs, GradcheckArgs, InspectArgs, SynthArgs, TrainArgs,
};
use crate::config::{read_config_file, Resolved};
use specfront::analysis::{cumulative_importance, kernel_dft, stft_cumulative_importance};
use specfront::bankfile::{export_matrix_csv, export_vector_csv, BankFile};
use specfront::error::{Error, Result};
use specfront::frontend::MaskSpec;
use specfront::gradcheck;
use specfront::optim::TrainSetting;
use specfront::signal_io::{
    load_clips, read_manifest, synth_toy_dataset, write_manifest, write_wav_pcm16,
    DatasetManifest, EntrySource, Task, WaveformClip,
};
use specfront::trainer::{
    evaluate_asr, evaluate_kws, split_train_eval, train_asr, train_kws, AsrModel, EpochReport,
    KwsModel, TrainConfig,
};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

fn file_map(config: &Option<PathBuf>) -> Result<BTreeMap<String, String>> {
    match config {
        Some(path) => read_config_file(path),
        None => Ok(BTreeMap::new()),
    }
}

fn parse_task(flag: &Option<String>, file: &BTreeMap<String, String>) -> Result<Task> {
    match (flag, file.get("task")) {
        (Some(s), _) => s.parse(),
        (None, Some(s)) => s.parse(),
        (None, None) => Ok(Task::Kws),
    }
}

/// Dataset loaded into memory along with its manifest.
struct Loaded {
    manifest: DatasetManifest,
    clips: Vec<WaveformClip>,
}

fn load_dataset(resolved: &Resolved) -> Result<Loaded> {
    match &resolved.manifest {
        Some(path) => {
            let manifest = read_manifest(path, resolved.train.task)?;
            let base = path.parent().unwrap_or(Path::new("."));
            let clips = load_clips(&manifest, base)?;
            Ok(Loaded { manifest, clips })
        }
        None => {
            let (manifest, clips) =
                synth_toy_dataset(resolved.train.task, resolved.n_per_class, resolved.train.seed)?;
            Ok(Loaded { manifest, clips })
        }
    }
}

pub fn run_synth(args: &SynthArgs, config: &Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let file = file_map(config)?;
    let task = parse_task(&args.task, &file)?;
    let n_per_class = match (args.n_per_class, file.get("n_per_class")) {
        (Some(n), _) => n,
        (None, Some(s)) => s
            .parse()
            .map_err(|_| Error::Parse(format!("bad integer `{s}`")))?,
        (None, None) => match task {
            Task::Kws => 50,
            Task::Asr => 100,
        },
    };
    let seed = seed.unwrap_or(0);
    println!("# config task={task} n_per_class={n_per_class} seed={seed} write_wavs={}", args.write_wavs);

    let (mut manifest, clips) = synth_toy_dataset(task, n_per_class, seed)?;
    std::fs::create_dir_all(&args.out_dir)?;
    if args.write_wavs {
        let clip_dir = args.out_dir.join("clips");
        std::fs::create_dir_all(&clip_dir)?;
        for (i, clip) in clips.iter().enumerate() {
            let rel = PathBuf::from("clips").join(format!("clip_{i:05}.wav"));
            write_wav_pcm16(&args.out_dir.join(&rel), &clip.samples, clip.sample_rate_hz)?;
            manifest.entries[i].0 = EntrySource::Path(rel);
        }
    }
    let path = args.out_dir.join("manifest.csv");
    write_manifest(&path, &manifest)?;
    println!("wrote {} ({} clips)", path.display(), clips.len());
    Ok(())
}

/// Deterministic epoch-report CSV (no wall-clock column; timing goes to
/// stderr so identical runs produce identical bytes).
fn report_row(report: &EpochReport) -> String {
    format!("{},{},{}", report.epoch, report.train_loss, report.metric)
}

fn write_out(path: &Option<PathBuf>, content: &str) -> Result<()> {
    if let Some(path) = path {
        std::fs::write(path, content)?;
    }
    Ok(())
}

pub fn run_train(args: &TrainArgs, config: &Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let file = file_map(config)?;
    let resolved = Resolved::from_knobs(&args.knobs, &file, seed)?;
    let loaded = load_dataset(&resolved)?;

    let mut lines = vec![resolved.echo_line(), "epoch,train_loss,metric".to_string()];
    for line in &lines {
        println!("{line}");
    }

    if let Some(dir) = &args.ckpt_dir {
        std::fs::create_dir_all(dir)?;
    }
    let ckpt_dir = args.ckpt_dir.clone();

    let final_bank: BankFile = match resolved.train.task {
        Task::Kws => {
            let mut hook = |epoch: usize, model: &KwsModel, report: &EpochReport| -> Result<()> {
                let row = report_row(report);
                println!("{row}");
                lines.push(row);
                eprintln!("# epoch {epoch}: {:.2}s", report.wall_secs);
                if let Some(dir) = &ckpt_dir {
                    model.to_bank().write(&dir.join(format!("epoch_{epoch:03}.csv")))?;
                }
                Ok(())
            };
            let outcome = train_kws(&resolved.train, &loaded.manifest, &loaded.clips, Some(&mut hook))?;
            outcome.model.to_bank()
        }
        Task::Asr => {
            let mut hook = |epoch: usize, model: &AsrModel, report: &EpochReport| -> Result<()> {
                let row = report_row(report);
                println!("{row}");
                lines.push(row);
                eprintln!("# epoch {epoch}: {:.2}s", report.wall_secs);
                if let Some(dir) = &ckpt_dir {
                    model.to_bank().write(&dir.join(format!("epoch_{epoch:03}.csv")))?;
                }
                Ok(())
            };
            let outcome = train_asr(&resolved.train, &loaded.manifest, &loaded.clips, Some(&mut hook))?;
            if outcome.skipped_infeasible > 0 {
                eprintln!(
                    "# skipped {} training clips with infeasible CTC alignments",
                    outcome.skipped_infeasible
                );
            }
            outcome.model.to_bank()
        }
    };

    if let Some(dir) = &args.ckpt_dir {
        final_bank.write(&dir.join("final.csv"))?;
    }
    let mut content = lines.join("\n");
    content.push('\n');
    write_out(&args.out, &content)?;
    Ok(())
}

fn eval_indices(manifest: &DatasetManifest, split: &str) -> Result<Vec<usize>> {
    let ids: Vec<String> = manifest.entries.iter().map(|(s, _)| s.id()).collect();
    let (train, eval) = split_train_eval(&ids);
    match split {
        "all" => Ok((0..ids.len()).collect()),
        "train" => Ok(train),
        "eval" => Ok(eval),
        other => Err(Error::Parse(format!(
            "unknown split `{other}` (expected all, train, or eval)"
        ))),
    }
}

pub fn run_eval(args: &EvalArgs, config: &Option<PathBuf>) -> Result<()> {
    let file = file_map(config)?;
    let task = parse_task(&args.task, &file)?;
    let mask: MaskSpec = match (&args.mask, file.get("mask")) {
        (Some(s), _) => s.parse()?,
        (None, Some(s)) => s.parse()?,
        (None, None) => MaskSpec::none(),
    };
    let manifest = read_manifest(&args.manifest, task)?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let clips = load_clips(&manifest, base)?;
    let indices = eval_indices(&manifest, &args.split)?;
    let bank = BankFile::read(&args.params)?;

    println!(
        "# eval task={task} params={} manifest={} split={} mask={mask}",
        args.params.display(),
        args.manifest.display(),
        args.split
    );
    match task {
        Task::Kws => {
            let model = KwsModel::from_bank(&bank)?;
            let acc = evaluate_kws(&model, &clips, &indices, &mask)?;
            println!("accuracy_percent,{acc}");
        }
        Task::Asr => {
            let model = AsrModel::from_bank(&bank)?;
            let per = evaluate_asr(&model, &clips, &indices, &mask)?;
            println!("per_percent,{per}");
        }
    }
    Ok(())
}

/// Final eval metric of one full training run.
fn train_final_metric(config: &TrainConfig, loaded: &Loaded) -> Result<f64> {
    let metric = match config.task {
        Task::Kws => {
            let outcome = train_kws(config, &loaded.manifest, &loaded.clips, None)?;
            outcome.reports.last().map(|r| r.metric)
        }
        Task::Asr => {
            let outcome = train_asr(config, &loaded.manifest, &loaded.clips, None)?;
            outcome.reports.last().map(|r| r.metric)
        }
    };
    metric.ok_or_else(|| Error::Config("ablation needs epochs >= 1".into()))
}

pub fn run_ablate_mask(
    args: &AblateMaskArgs,
    config: &Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let file = file_map(config)?;
    let resolved = Resolved::from_knobs(&args.knobs, &file, seed)?;
    let loaded = load_dataset(&resolved)?;

    let metric_name = match resolved.train.task {
        Task::Kws => "kws_accuracy_percent",
        Task::Asr => "asr_per_percent",
    };
    let mut lines = vec![resolved.echo_line(), format!("mask,{metric_name}")];
    for line in &lines {
        println!("{line}");
    }
    for token in args.masks.split(',') {
        // `+` joins intervals of one multi-interval mask.
        let mask: MaskSpec = token.trim().replace('+', ",").parse()?;
        let config = TrainConfig {
            mask: mask.clone(),
            ..resolved.train.clone()
        };
        let metric = train_final_metric(&config, &loaded)?;
        let row = format!("{},{metric}", mask_label(token));
        println!("{row}");
        lines.push(row);
    }
    let mut content = lines.join("\n");
    content.push('\n');
    write_out(&args.out, &content)
}

fn mask_label(token: &str) -> String {
    let token = token.trim();
    if token.is_empty() {
        "none".to_string()
    } else {
        token.to_string()
    }
}

pub fn run_ablate_mels(
    args: &AblateMelsArgs,
    config: &Option<PathBuf>,
    seed: Option<u64>,
) -> Result<()> {
    let file = file_map(config)?;
    let resolved = Resolved::from_knobs(&args.knobs, &file, seed)?;
    let loaded = load_dataset(&resolved)?;

    let n_mels_grid: Vec<usize> = args
        .n_mels_grid
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad n_mels `{s}`")))
        })
        .collect::<Result<_>>()?;
    let settings: Vec<TrainSetting> = args
        .settings
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;

    let metric_name = match resolved.train.task {
        Task::Kws => "kws_accuracy_percent",
        Task::Asr => "asr_per_percent",
    };
    let mut lines = vec![resolved.echo_line(), format!("n_mels,setting,{metric_name}")];
    for line in &lines {
        println!("{line}");
    }
    for &n_mels in &n_mels_grid {
        for &setting in &settings {
            let config = TrainConfig {
                n_mels,
                setting,
                ..resolved.train.clone()
            };
            let metric = train_final_metric(&config, &loaded)?;
            let row = format!("{n_mels},{setting},{metric}");
            println!("{row}");
            lines.push(row);
        }
    }
    let mut content = lines.join("\n");
    content.push('\n');
    write_out(&args.out, &content)
}

pub fn run_inspect(args: &InspectArgs) -> Result<()> {
    let bank = BankFile::read(&args.params)?;
    // Either model flavor carries the same front-end sections.
    let (stft, mel) = match KwsModel::from_bank(&bank) {
        Ok(m) => (m.stft, m.mel),
        Err(_) => {
            let m = AsrModel::from_bank(&bank)?;
            (m.stft, m.mel)
        }
    };
    std::fs::create_dir_all(&args.out_dir)?;

    let mel_bank_path = args.out_dir.join("mel_bank.csv");
    export_matrix_csv(&mel_bank_path, "mel.weights", &mel.weights)?;

    let mel_imp_path = args.out_dir.join("mel_importance.csv");
    export_vector_csv(&mel_imp_path, "mel_importance", &cumulative_importance(&mel)?)?;

    let stft_imp_path = args.out_dir.join("stft_importance.csv");
    export_vector_csv(
        &stft_imp_path,
        "stft_importance",
        &stft_cumulative_importance(&stft)?,
    )?;

    let dft_path = args.out_dir.join(format!("kernel_dft_bin{:03}.csv", args.bin));
    export_vector_csv(
        &dft_path,
        &format!("kernel_dft_bin{}", args.bin),
        &kernel_dft(&stft, args.bin)?,
    )?;

    for path in [&mel_bank_path, &mel_imp_path, &stft_imp_path, &dft_path] {
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn run_gradcheck(_args: &GradcheckArgs, seed: Option<u64>) -> Result<()> {
    let reports = gradcheck::run_all(seed.unwrap_or(0));
    println!("suite,max_rel_err,checks,tolerance,status");
    let mut all_ok = true;
    for r in &reports {
        let status = if r.passed() { "pass" } else { "FAIL" };
        all_ok &= r.passed();
        println!(
            "{},{:.3e},{},{:.0e},{status}",
            r.name, r.max_rel_err, r.checks, r.tolerance
        );
        std::io::stdout().flush().ok();
    }
    if all_ok {
        Ok(())
    } else {
        Err(Error::Config("gradient checks failed".into()))
    }
}
