//! CSV dataset manifests.
//!
//! Format: a header row `# classes: name0,name1,...` followed by one row
//! per clip, `path_or_recipe,label`. KWS labels are single class indices;
//! ASR labels are space-separated phoneme index sequences.

use super::synth::SynthRecipe;
use super::{parse_wav, resample_to_16k, ClipLabel, Task, WaveformClip};
use crate::error::{Error, Result};
use std::path::{Path, PathBuf};

/// Where a clip comes from: a WAV file on disk or a synthesis recipe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntrySource {
    Path(PathBuf),
    Recipe(SynthRecipe),
}

impl EntrySource {
    /// Stable identifier used for deterministic train/eval splitting.
    pub fn id(&self) -> String {
        match self {
            EntrySource::Path(p) => p.to_string_lossy().into_owned(),
            EntrySource::Recipe(r) => r.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<(EntrySource, ClipLabel)>,
    pub class_names: Vec<String>,
    pub task: Task,
}

impl DatasetManifest {
    pub fn new(
        entries: Vec<(EntrySource, ClipLabel)>,
        class_names: Vec<String>,
        task: Task,
    ) -> Result<Self> {
        let n_classes = class_names.len();
        for (source, label) in &entries {
            let ok = match (task, label) {
                (Task::Kws, ClipLabel::Class(c)) => *c < n_classes,
                (Task::Asr, ClipLabel::Phonemes(seq)) => {
                    !seq.is_empty() && seq.iter().all(|&s| s < n_classes)
                }
                _ => false,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "entry `{}` has a label outside the {} classes",
                    source.id(),
                    n_classes
                )));
            }
        }
        Ok(DatasetManifest {
            entries,
            class_names,
            task,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Serialize a manifest to CSV.
pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut out = String::new();
    out.push_str("# classes: ");
    out.push_str(&manifest.class_names.join(","));
    out.push('\n');
    for (source, label) in &manifest.entries {
        let label_str = match label {
            ClipLabel::Class(c) => c.to_string(),
            ClipLabel::Phonemes(seq) => seq
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" "),
            ClipLabel::Unlabeled => String::new(),
        };
        out.push_str(&format!("{},{}\n", source.id(), label_str));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a manifest file. The task determines how labels are read.
pub fn read_manifest(path: &Path, task: Task) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty manifest".into()))?;
    let class_names: Vec<String> = header
        .strip_prefix("# classes:")
        .ok_or_else(|| Error::Parse("manifest must start with `# classes: ...`".into()))?
        .trim()
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if class_names.is_empty() {
        return Err(Error::Parse("manifest lists no classes".into()));
    }

    let mut entries = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (source_str, label_str) = line.split_once(',').ok_or_else(|| {
            Error::Parse(format!("line {}: expected `source,label`", lineno + 2))
        })?;
        let source = if source_str.starts_with("synth:") {
            EntrySource::Recipe(source_str.parse()?)
        } else {
            EntrySource::Path(PathBuf::from(source_str))
        };
        let label = match task {
            Task::Kws => ClipLabel::Class(label_str.trim().parse().map_err(|_| {
                Error::Parse(format!("line {}: bad class index `{label_str}`", lineno + 2))
            })?),
            Task::Asr => {
                let seq: std::result::Result<Vec<usize>, _> =
                    label_str.split_whitespace().map(|s| s.parse()).collect();
                ClipLabel::Phonemes(seq.map_err(|_| {
                    Error::Parse(format!(
                        "line {}: bad phoneme sequence `{label_str}`",
                        lineno + 2
                    ))
                })?)
            }
        };
        entries.push((source, label));
    }
    DatasetManifest::new(entries, class_names, task)
}

/// Materialize every entry: read/parse/resample WAV files, run synthesis
/// recipes, attach labels, and normalize KWS clips to exactly one second.
pub fn load_clips(manifest: &DatasetManifest, base_dir: &Path) -> Result<Vec<WaveformClip>> {
    let mut clips = Vec::with_capacity(manifest.entries.len());
    for (source, label) in &manifest.entries {
        let mut clip = match source {
            EntrySource::Path(p) => {
                let full = if p.is_absolute() {
                    p.clone()
                } else {
                    base_dir.join(p)
                };
                let bytes = std::fs::read(&full)?;
                let parsed = parse_wav(&bytes)?;
                resample_to_16k(&parsed)?
            }
            EntrySource::Recipe(r) => r.generate()?,
        };
        clip.label = label.clone();
        if manifest.task == Task::Kws {
            clip.fix_length(crate::SAMPLE_RATE_HZ as usize);
        }
        clip.check_invariants()?;
        clips.push(clip);
    }
    Ok(clips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::synth_toy_dataset;
    use crate::signal_io::wav::write_wav_pcm16;

    #[test]
    fn manifest_round_trip_with_recipes() {
        let (manifest, clips) = synth_toy_dataset(Task::Kws, 2, 9).unwrap();
        let dir = std::env::temp_dir().join("specfront_manifest_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("manifest.csv");
        write_manifest(&path, &manifest).unwrap();
        let back = read_manifest(&path, Task::Kws).unwrap();
        assert_eq!(back, manifest);
        let loaded = load_clips(&back, &dir).unwrap();
        assert_eq!(loaded, clips);
    }

    #[test]
    fn asr_manifest_round_trip() {
        let (manifest, _) = synth_toy_dataset(Task::Asr, 4, 2).unwrap();
        let dir = std::env::temp_dir().join("specfront_manifest_asr");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("manifest.csv");
        write_manifest(&path, &manifest).unwrap();
        let back = read_manifest(&path, Task::Asr).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn wav_entries_are_loaded_and_length_fixed() {
        let dir = std::env::temp_dir().join("specfront_manifest_wav");
        std::fs::create_dir_all(&dir).unwrap();
        // A short 8 kHz file: must be resampled and zero-padded to 1 s.
        let samples: Vec<f64> = (0..4000).map(|i| ((i as f64) * 0.05).sin() * 0.5).collect();
        write_wav_pcm16(&dir.join("clip.wav"), &samples, 8000).unwrap();
        std::fs::write(
            dir.join("manifest.csv"),
            "# classes: a,b\nclip.wav,1\n",
        )
        .unwrap();
        let manifest = read_manifest(&dir.join("manifest.csv"), Task::Kws).unwrap();
        let clips = load_clips(&manifest, &dir).unwrap();
        assert_eq!(clips.len(), 1);
        assert_eq!(clips[0].samples.len(), 16000);
        assert_eq!(clips[0].sample_rate_hz, 16000);
        assert_eq!(clips[0].label, ClipLabel::Class(1));
    }

    #[test]
    fn out_of_range_label_rejected() {
        let dir = std::env::temp_dir().join("specfront_manifest_bad");
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("manifest.csv"),
            "# classes: a,b\nsynth:kws:0:0:0,7\n",
        )
        .unwrap();
        assert!(read_manifest(&dir.join("manifest.csv"), Task::Kws).is_err());
    }
}
