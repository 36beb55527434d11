//! Effective run configuration: defaults, overridden by a flat key=value
//! config file, overridden by command-line flags.

use crate::args::TrainKnobs;
use specfront::error::{Error, Result};
use specfront::frontend::{MaskSpec, MelStyle};
use specfront::optim::TrainSetting;
use specfront::signal_io::Task;
use specfront::trainer::{MelInit, TrainConfig};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Parse a `key=value` file; blank lines and `#` comments are skipped.
pub fn read_config_file(path: &std::path::Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!(
                "{}:{}: expected key=value, got `{line}`",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_mel_style(s: &str) -> Result<MelStyle> {
    match s.to_ascii_lowercase().as_str() {
        "freeform" => Ok(MelStyle::FreeForm),
        "constrained" => Ok(MelStyle::ShapeConstrained),
        other => Err(Error::Parse(format!(
            "unknown mel style `{other}` (expected freeform or constrained)"
        ))),
    }
}

fn parse_mel_init(s: &str) -> Result<MelInit> {
    match s.to_ascii_lowercase().as_str() {
        "triangular" => Ok(MelInit::Triangular),
        "random" => Ok(MelInit::Random),
        other => Err(Error::Parse(format!(
            "unknown mel init `{other}` (expected triangular or random)"
        ))),
    }
}

/// Fully resolved training configuration plus dataset source.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub train: TrainConfig,
    pub n_per_class: usize,
    pub manifest: Option<PathBuf>,
}

macro_rules! resolve {
    ($flag:expr, $file:expr, $key:literal, $parse:expr, $default:expr) => {
        match (&$flag, $file.get($key)) {
            (Some(v), _) => $parse(v)?,
            (None, Some(v)) => $parse(v.as_str())?,
            (None, None) => $default,
        }
    };
}

impl Resolved {
    pub fn from_knobs(
        knobs: &TrainKnobs,
        file: &BTreeMap<String, String>,
        global_seed: Option<u64>,
    ) -> Result<Resolved> {
        let parse_task = |s: &str| s.parse::<Task>();
        let parse_setting = |s: &str| s.parse::<TrainSetting>();
        let parse_mask = |s: &str| s.parse::<MaskSpec>();
        let parse_usize =
            |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad integer `{s}`")));
        let parse_f64 =
            |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad float `{s}`")));
        let parse_u64 =
            |s: &str| s.parse::<u64>().map_err(|_| Error::Parse(format!("bad integer `{s}`")));

        let defaults = TrainConfig::default();
        let task = resolve!(knobs.task, file, "task", parse_task, defaults.task);
        let seed = match (global_seed, file.get("seed")) {
            (Some(v), _) => v,
            (None, Some(v)) => parse_u64(v)?,
            (None, None) => defaults.seed,
        };

        let lr_mel = match (&knobs.lr_mel, file.get("lr.mel")) {
            (Some(v), _) => Some(*v),
            (None, Some(v)) => Some(parse_f64(v)?),
            (None, None) => None,
        };
        let lr_stft = match (&knobs.lr_stft, file.get("lr.stft")) {
            (Some(v), _) => Some(*v),
            (None, Some(v)) => Some(parse_f64(v)?),
            (None, None) => None,
        };

        let train = TrainConfig {
            task,
            setting: resolve!(knobs.setting, file, "setting", parse_setting, defaults.setting),
            mel_style: resolve!(knobs.mel_style, file, "mel_style", parse_mel_style, defaults.mel_style),
            mel_init: resolve!(knobs.mel_init, file, "mel_init", parse_mel_init, defaults.mel_init),
            n_mels: resolve!(knobs.n_mels.map(|v| v.to_string()), file, "n_mels", parse_usize, defaults.n_mels),
            mask: resolve!(knobs.mask, file, "mask", parse_mask, MaskSpec::none()),
            lr: resolve!(knobs.lr.map(|v| v.to_string()), file, "lr", parse_f64, defaults.lr),
            lr_mel,
            lr_stft,
            epochs: resolve!(knobs.epochs.map(|v| v.to_string()), file, "epochs", parse_usize, defaults.epochs),
            batch_size: resolve!(knobs.batch_size.map(|v| v.to_string()), file, "batch_size", parse_usize, defaults.batch_size),
            seed,
            lstm_hidden: resolve!(knobs.lstm_hidden.map(|v| v.to_string()), file, "lstm_hidden", parse_usize, defaults.lstm_hidden),
        };

        let n_per_class = resolve!(
            knobs.n_per_class.map(|v| v.to_string()),
            file,
            "n_per_class",
            parse_usize,
            match task {
                Task::Kws => 50,
                Task::Asr => 100,
            }
        );
        let manifest = match (&knobs.manifest, file.get("manifest")) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(p)) => Some(PathBuf::from(p)),
            (None, None) => None,
        };

        Ok(Resolved {
            train,
            n_per_class,
            manifest,
        })
    }

    /// One-line echo of every effective value, printed before any output.
    pub fn echo_line(&self) -> String {
        let t = &self.train;
        let style = match t.mel_style {
            MelStyle::FreeForm => "freeform",
            MelStyle::ShapeConstrained => "constrained",
        };
        let init = match t.mel_init {
            MelInit::Triangular => "triangular",
            MelInit::Random => "random",
        };
        let opt = |v: &Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
        format!(
            "# config task={} setting={} mel_style={} mel_init={} n_mels={} mask={} lr={} lr.mel={} lr.stft={} epochs={} batch_size={} seed={} lstm_hidden={} n_per_class={} manifest={}",
            t.task,
            t.setting,
            style,
            init,
            t.n_mels,
            t.mask,
            t.lr,
            opt(&t.lr_mel),
            opt(&t.lr_stft),
            t.epochs,
            t.batch_size,
            t.seed,
            t.lstm_hidden,
            self.n_per_class,
            self.manifest
                .as_ref()
                .map_or("-".to_string(), |p| p.display().to_string()),
        )
    }
}
