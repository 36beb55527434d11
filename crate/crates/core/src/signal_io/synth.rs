//! Deterministic synthetic toy datasets.
//!
//! Keyword spotting: 12 classes — ten "word" classes, each a class-unique
//! chord of 2-3 sinusoids spread over 200-6000 Hz, plus "unknown" (chords
//! from a disjoint frequency pool) and "silence" (noise only). One second
//! per clip, Gaussian noise at 10 dB SNR.
//!
//! Phoneme recognition: utterances concatenate 3-8 segments of 80-200 ms,
//! each a class-unique chord from a 61-symbol inventory; the label is the
//! segment index sequence.
//!
//! Every clip is a pure function of `(task, seed, class, index)`, so
//! manifests can reference clips by recipe instead of by file.

use super::manifest::{DatasetManifest, EntrySource};
use super::{ClipLabel, Task, WaveformClip};
use crate::error::{Error, Result};
use crate::SAMPLE_RATE_HZ;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const KWS_CLASSES: usize = 12;
pub const KWS_WORDS: usize = 10;
pub const KWS_UNKNOWN: usize = 10;
pub const KWS_SILENCE: usize = 11;
pub const ASR_PHONEMES: usize = 61;

const KWS_CLIP_LEN: usize = SAMPLE_RATE_HZ as usize;
const SNR_DB: f64 = 10.0;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x5F4A7C15u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

const TAG_KWS_TABLE: u64 = 0x6B77735F74616231;
const TAG_KWS_CLIP: u64 = 0x6B77735F636C6970;
const TAG_ASR_TABLE: u64 = 0x6173725F74616231;
const TAG_ASR_CLIP: u64 = 0x6173725F636C6970;

fn shuffle(v: &mut [f64], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Chord frequency tables for the ten word classes plus the disjoint pool
/// used by the "unknown" class. Pure function of the seed.
///
/// Words come in five pairs. Both classes of a pair share their low
/// component(s) and differ only by 115 Hz (about 3.5 STFT bins) in the high
/// one, so telling them apart requires frequency resolution finer than a
/// wide Mel bin.
fn kws_tables(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, TAG_KWS_TABLE]));
    let mut lows: Vec<f64> = (0..10).map(|i| 300.0 + 120.0 * i as f64).collect();
    let mut highs: Vec<f64> = (0..10).map(|i| 1800.0 + 420.0 * i as f64).collect();
    shuffle(&mut lows, &mut rng);
    shuffle(&mut highs, &mut rng);

    let mut classes = Vec::with_capacity(KWS_WORDS);
    for p in 0..KWS_WORDS / 2 {
        let mut base = vec![lows[p]];
        // Some pairs carry a second shared low component (chords of 3).
        if rng.random_range(0..2) == 1 {
            base.push(lows[p] + 60.0);
        }
        let mut a = base.clone();
        a.push(highs[p]);
        let mut b = base;
        b.push(highs[p] + 115.0);
        classes.push(a);
        classes.push(b);
    }
    // Unused grid entries; disjoint from every word frequency.
    let mut unknown_pool: Vec<f64> = lows[5..].to_vec();
    unknown_pool.extend_from_slice(&highs[5..]);
    (classes, unknown_pool)
}

/// Chord inventory for the 61 toy phonemes: thirty low-anchor pairs plus
/// one singleton. The pair members share their low component and differ
/// only in the high one, which straddles a 40-filter Mel peak frequency at
/// +-20 Hz. A triangle responds almost identically to both offsets, so a
/// frozen standard bank is nearly blind to the pair split, while the STFT
/// grid (33.3 Hz bins) still separates it.
fn asr_tables(seed: u64) -> Vec<Vec<f64>> {
    use crate::frontend::{hz_to_mel, mel_to_hz};
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, TAG_ASR_TABLE]));
    let mut lows: Vec<f64> = (0..31).map(|i| 300.0 + 87.0 * i as f64).collect();
    shuffle(&mut lows, &mut rng);
    // Peak frequencies of filters 20..=36 in the standard 40-filter bank.
    let m_top = hz_to_mel(8000.0);
    let mut peaks: Vec<f64> = (21..=37).map(|p| mel_to_hz(p as f64 * m_top / 41.0)).collect();
    shuffle(&mut peaks, &mut rng);

    let mut chords = Vec::with_capacity(ASR_PHONEMES);
    for q in 0..ASR_PHONEMES / 2 {
        let anchor = peaks[q % peaks.len()];
        chords.push(vec![lows[q], anchor - 20.0]);
        chords.push(vec![lows[q], anchor + 20.0]);
    }
    chords.push(vec![lows[30], peaks[30 % peaks.len()] + 53.0]);
    chords
}

/// Raised-cosine attack/release envelope; `shape` powers sharpen the bump
/// (a plucked-note profile concentrates the energy mid-segment).
fn envelope(len: usize, ramp: usize, shape: i32) -> impl Fn(usize) -> f64 {
    move |i| {
        let ramp = ramp.min(len / 2).max(1);
        let base = if i < ramp {
            0.5 * (1.0 - (std::f64::consts::PI * i as f64 / ramp as f64).cos())
        } else if i + ramp > len {
            let k = len - i;
            0.5 * (1.0 - (std::f64::consts::PI * k as f64 / ramp as f64).cos())
        } else {
            1.0
        };
        base.powi(shape)
    }
}

/// Sum of sinusoids under an envelope, written into `out[at..at+len]`.
fn add_chord(
    out: &mut [f64],
    at: usize,
    len: usize,
    ramp: usize,
    shape: i32,
    freqs: &[f64],
    amp_range: (f64, f64),
    rng: &mut ChaCha8Rng,
) {
    let env = envelope(len, ramp, shape);
    let comps: Vec<(f64, f64, f64)> = freqs
        .iter()
        .map(|&f| {
            let amp = rng.random_range(amp_range.0..amp_range.1);
            let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            (f, amp, phase)
        })
        .collect();
    for i in 0..len {
        let t = (at + i) as f64 / SAMPLE_RATE_HZ as f64;
        let mut s = 0.0;
        for &(f, a, p) in &comps {
            s += a * (2.0 * std::f64::consts::PI * f * t + p).sin();
        }
        out[at + i] += env(i) * s;
    }
}

/// Add Gaussian noise at `SNR_DB` relative to the current signal power,
/// then clamp into `[-1, 1]`.
fn add_noise_and_clamp(samples: &mut [f64], rng: &mut ChaCha8Rng, silence_sigma: Option<f64>) {
    let sigma = match silence_sigma {
        Some(s) => s,
        None => {
            let power: f64 =
                samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64;
            (power / 10f64.powf(SNR_DB / 10.0)).sqrt()
        }
    };
    for s in samples.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *s = (*s + sigma * n).clamp(-1.0, 1.0);
    }
}

/// Generate one keyword-spotting clip.
pub fn synth_kws_clip(seed: u64, class: usize, index: usize) -> Result<WaveformClip> {
    if class >= KWS_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "KWS class {class} out of range"
        )));
    }
    let (classes, unknown_pool) = kws_tables(seed);
    let mut rng =
        ChaCha8Rng::seed_from_u64(mix(&[seed, TAG_KWS_CLIP, class as u64, index as u64]));
    let mut samples = vec![0.0; KWS_CLIP_LEN];
    if class == KWS_SILENCE {
        let sigma = rng.random_range(0.02..0.06);
        add_noise_and_clamp(&mut samples, &mut rng, Some(sigma));
    } else {
        let freqs: Vec<f64> = if class == KWS_UNKNOWN {
            let n = 2 + rng.random_range(0..2usize);
            let mut picked = Vec::with_capacity(n);
            while picked.len() < n {
                let f = unknown_pool[rng.random_range(0..unknown_pool.len())];
                if !picked.contains(&f) {
                    picked.push(f);
                }
            }
            picked
        } else {
            classes[class].clone()
        };
        add_chord(&mut samples, 0, KWS_CLIP_LEN, 1200, 1, &freqs, (0.12, 0.25), &mut rng);
        add_noise_and_clamp(&mut samples, &mut rng, None);
    }
    Ok(WaveformClip {
        samples,
        sample_rate_hz: SAMPLE_RATE_HZ,
        label: ClipLabel::Class(class),
    })
}

/// Generate one phoneme-sequence utterance.
pub fn synth_asr_clip(seed: u64, index: usize) -> Result<WaveformClip> {
    let chords = asr_tables(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, TAG_ASR_CLIP, index as u64]));
    let n_segments = rng.random_range(3..=8usize);
    let mut symbols = Vec::with_capacity(n_segments);
    let mut segment_lens = Vec::with_capacity(n_segments);
    for _ in 0..n_segments {
        symbols.push(rng.random_range(0..ASR_PHONEMES));
        // 80-200 ms per segment.
        segment_lens.push(rng.random_range(1280..=3200usize));
    }
    let total: usize = segment_lens.iter().sum();
    let mut samples = vec![0.0; total];
    let mut at = 0;
    for (&sym, &len) in symbols.iter().zip(segment_lens.iter()) {
        // Arched envelope: the loudest frame sits mid-segment, which gives
        // the alignment something to lock onto.
        add_chord(&mut samples, at, len, len / 2, 3, &chords[sym], (0.05, 0.1), &mut rng);
        at += len;
    }
    add_noise_and_clamp(&mut samples, &mut rng, None);
    Ok(WaveformClip {
        samples,
        sample_rate_hz: SAMPLE_RATE_HZ,
        label: ClipLabel::Phonemes(symbols),
    })
}

/// A `synth:` manifest entry naming one generated clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthRecipe {
    pub task: Task,
    pub seed: u64,
    /// KWS class; `None` for ASR utterances.
    pub class: Option<usize>,
    pub index: usize,
}

impl SynthRecipe {
    pub fn generate(&self) -> Result<WaveformClip> {
        match self.task {
            Task::Kws => synth_kws_clip(
                self.seed,
                self.class
                    .ok_or_else(|| Error::Parse("KWS recipe needs a class".into()))?,
                self.index,
            ),
            Task::Asr => synth_asr_clip(self.seed, self.index),
        }
    }
}

impl std::fmt::Display for SynthRecipe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.task {
            Task::Kws => write!(
                f,
                "synth:kws:{}:{}:{}",
                self.seed,
                self.class.unwrap_or(0),
                self.index
            ),
            Task::Asr => write!(f, "synth:asr:{}:{}", self.seed, self.index),
        }
    }
}

impl std::str::FromStr for SynthRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Parse(format!("bad synth recipe `{s}`"));
        if parts.first() != Some(&"synth") {
            return Err(bad());
        }
        match parts.get(1) {
            Some(&"kws") if parts.len() == 5 => Ok(SynthRecipe {
                task: Task::Kws,
                seed: parts[2].parse().map_err(|_| bad())?,
                class: Some(parts[3].parse().map_err(|_| bad())?),
                index: parts[4].parse().map_err(|_| bad())?,
            }),
            Some(&"asr") if parts.len() == 4 => Ok(SynthRecipe {
                task: Task::Asr,
                seed: parts[2].parse().map_err(|_| bad())?,
                class: None,
                index: parts[3].parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

fn kws_class_names() -> Vec<String> {
    let mut names: Vec<String> = (0..KWS_WORDS).map(|c| format!("word{c}")).collect();
    names.push("unknown".into());
    names.push("silence".into());
    names
}

fn asr_class_names() -> Vec<String> {
    let mut names: Vec<String> = (0..ASR_PHONEMES).map(|c| format!("ph{c:02}")).collect();
    names.push("sep".into());
    names
}

/// Build a toy dataset.
///
/// For KWS, `n_per_class` clips are generated for each of the 12 classes;
/// for ASR it is the total utterance count. Generation is a pure function
/// of `(task, n_per_class, seed)`.
pub fn synth_toy_dataset(
    task: Task,
    n_per_class: usize,
    seed: u64,
) -> Result<(DatasetManifest, Vec<WaveformClip>)> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be >= 1".into()));
    }
    let mut entries = Vec::new();
    let mut clips = Vec::new();
    match task {
        Task::Kws => {
            for class in 0..KWS_CLASSES {
                for index in 0..n_per_class {
                    let recipe = SynthRecipe {
                        task,
                        seed,
                        class: Some(class),
                        index,
                    };
                    let clip = recipe.generate()?;
                    entries.push((EntrySource::Recipe(recipe), clip.label.clone()));
                    clips.push(clip);
                }
            }
        }
        Task::Asr => {
            for index in 0..n_per_class {
                let recipe = SynthRecipe {
                    task,
                    seed,
                    class: None,
                    index,
                };
                let clip = recipe.generate()?;
                entries.push((EntrySource::Recipe(recipe), clip.label.clone()));
                clips.push(clip);
            }
        }
    }
    let class_names = match task {
        Task::Kws => kws_class_names(),
        Task::Asr => asr_class_names(),
    };
    let manifest = DatasetManifest::new(entries, class_names, task)?;
    Ok((manifest, clips))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kws_generation_is_deterministic() {
        let (_, a) = synth_toy_dataset(Task::Kws, 1, 0).unwrap();
        let (_, b) = synth_toy_dataset(Task::Kws, 1, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kws_shape_and_invariants() {
        let (manifest, clips) = synth_toy_dataset(Task::Kws, 5, 0).unwrap();
        assert_eq!(clips.len(), 12 * 5);
        assert_eq!(manifest.class_names.len(), 12);
        for clip in &clips {
            assert_eq!(clip.samples.len(), 16000);
            assert_eq!(clip.sample_rate_hz, 16000);
            clip.check_invariants().unwrap();
        }
    }

    #[test]
    fn asr_labels_in_range() {
        let (_, clips) = synth_toy_dataset(Task::Asr, 3, 1).unwrap();
        assert_eq!(clips.len(), 3);
        for clip in &clips {
            clip.check_invariants().unwrap();
            match &clip.label {
                ClipLabel::Phonemes(seq) => {
                    assert!((3..=8).contains(&seq.len()));
                    assert!(seq.iter().all(|&s| s < 61));
                }
                other => panic!("expected phoneme label, got {other:?}"),
            }
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = synth_kws_clip(0, 3, 0).unwrap();
        let b = synth_kws_clip(1, 3, 0).unwrap();
        assert_ne!(a.samples, b.samples);
    }

    #[test]
    fn word_tables_disjoint_from_unknown_pool() {
        let (classes, unknown) = kws_tables(7);
        for chord in &classes {
            for f in chord {
                assert!(!unknown.contains(f));
            }
        }
        assert_eq!(classes.len(), 10);
    }

    #[test]
    fn recipe_string_round_trip() {
        let r = SynthRecipe {
            task: Task::Kws,
            seed: 42,
            class: Some(7),
            index: 13,
        };
        let s = r.to_string();
        assert_eq!(s, "synth:kws:42:7:13");
        assert_eq!(s.parse::<SynthRecipe>().unwrap(), r);

        let r = SynthRecipe {
            task: Task::Asr,
            seed: 5,
            class: None,
            index: 2,
        };
        assert_eq!(r.to_string().parse::<SynthRecipe>().unwrap(), r);
        assert!("synth:bogus:1".parse::<SynthRecipe>().is_err());
    }

    #[test]
    fn recipe_regenerates_identical_clip() {
        let (manifest, clips) = synth_toy_dataset(Task::Kws, 2, 3).unwrap();
        for (i, (source, _)) in manifest.entries.iter().enumerate() {
            match source {
                EntrySource::Recipe(r) => {
                    assert_eq!(r.generate().unwrap(), clips[i]);
                }
                _ => panic!("expected recipe entries"),
            }
        }
    }
}
