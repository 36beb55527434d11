//! Minimal RIFF/WAVE reader and a 16-bit PCM writer.

use super::{ClipLabel, WaveformClip};
use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

fn le_u32(b: &[u8], at: usize) -> Result<u32> {
    let s = b
        .get(at..at + 4)
        .ok_or_else(|| Error::Format("truncated WAV header".into()))?;
    Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
}

fn le_u16(b: &[u8], at: usize) -> Result<u16> {
    let s = b
        .get(at..at + 2)
        .ok_or_else(|| Error::Format("truncated WAV header".into()))?;
    Ok(u16::from_le_bytes([s[0], s[1]]))
}

/// Decode a RIFF/WAVE byte buffer into a mono clip.
///
/// Supports PCM 8/16/24-bit integers and 32-bit IEEE float; multichannel
/// audio is averaged down to mono; integer samples are scaled to `[-1, 1]`
/// by the type's maximum magnitude.
pub fn parse_wav(bytes: &[u8]) -> Result<WaveformClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE container".into()));
    }

    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // codec, channels, rate, bits
    let mut data: Option<&[u8]> = None;

    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4)? as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(Error::Format(format!(
                "chunk `{}` declares {} bytes beyond end of file",
                String::from_utf8_lossy(id),
                size
            )));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Format("fmt chunk too short".into()));
                }
                fmt = Some((
                    le_u16(body, 0)?,
                    le_u16(body, 2)?,
                    le_u32(body, 4)?,
                    le_u16(body, 14)?,
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_start + size + (size & 1);
    }

    let (codec, channels, rate, bits) =
        fmt.ok_or_else(|| Error::Format("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("missing data chunk".into()))?;
    if channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }
    if rate == 0 {
        return Err(Error::Format("zero sample rate".into()));
    }

    let decode: fn(&[u8]) -> f64 = match (codec, bits) {
        (1, 8) => |b| (b[0] as f64 - 128.0) / 128.0,
        (1, 16) => |b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        (1, 24) => |b| {
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            v as f64 / 8_388_608.0
        },
        (3, 32) => |b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        _ => {
            return Err(Error::UnsupportedEncoding(format!(
                "codec {codec} at {bits} bits"
            )))
        }
    };
    let bytes_per_sample = (bits / 8) as usize;
    let frame_size = bytes_per_sample * channels as usize;
    let n_frames = data.len() / frame_size;

    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0;
        for ch in 0..channels as usize {
            let at = f * frame_size + ch * bytes_per_sample;
            acc += decode(&data[at..at + bytes_per_sample]);
        }
        samples.push((acc / channels as f64).clamp(-1.0, 1.0));
    }

    Ok(WaveformClip {
        samples,
        sample_rate_hz: rate,
        label: ClipLabel::Unlabeled,
    })
}

/// Serialize a mono clip as 16-bit PCM.
pub fn write_wav_pcm16(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let n = samples.len();
    let data_size = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_wav(channels: u16, rate: u32, frames: &[&[i16]]) -> Vec<u8> {
        let data_size = (frames.len() * channels as usize * 2) as u32;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_size).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * channels as u32 * 2).to_le_bytes());
        out.extend_from_slice(&(channels * 2).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_size.to_le_bytes());
        for frame in frames {
            assert_eq!(frame.len(), channels as usize);
            for &v in *frame {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    #[test]
    fn pcm16_scaling() {
        let bytes = pcm16_wav(1, 16000, &[&[0], &[16384], &[-32768]]);
        let clip = parse_wav(&bytes).unwrap();
        assert_eq!(clip.sample_rate_hz, 16000);
        assert_eq!(clip.samples, vec![0.0, 0.5, -1.0]);
    }

    #[test]
    fn stereo_averaged_to_mono() {
        let bytes = pcm16_wav(2, 16000, &[&[32767, 0]]);
        let clip = parse_wav(&bytes).unwrap();
        assert_eq!(clip.samples.len(), 1);
        let want = (32767.0 / 32768.0) / 2.0;
        assert!((clip.samples[0] - want).abs() < 1e-12);
    }

    #[test]
    fn oversized_chunk_is_format_error() {
        let mut bytes = pcm16_wav(1, 16000, &[&[1], &[2]]);
        // Inflate the data chunk size field past EOF.
        let at = bytes.len() - 4 - 4;
        bytes[at..at + 4].copy_from_slice(&1_000u32.to_le_bytes());
        match parse_wav(&bytes) {
            Err(Error::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn garbage_rejected() {
        assert!(matches!(parse_wav(b"hello"), Err(Error::Format(_))));
        assert!(matches!(parse_wav(b""), Err(Error::Format(_))));
    }

    #[test]
    fn unsupported_codec_reported() {
        let mut bytes = pcm16_wav(1, 16000, &[&[1]]);
        bytes[20] = 7; // mu-law
        assert!(matches!(
            parse_wav(&bytes),
            Err(Error::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn float32_wav_roundtrip() {
        let mut out = Vec::new();
        let samples: [f32; 3] = [0.25, -0.5, 1.0];
        let data_size = (samples.len() * 4) as u32;
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_size).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&3u16.to_le_bytes()); // IEEE float
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&(16000u32 * 4).to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&32u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_size.to_le_bytes());
        for s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        let clip = parse_wav(&out).unwrap();
        assert_eq!(clip.samples, vec![0.25, -0.5, 1.0]);
    }

    #[test]
    fn writer_reader_roundtrip() {
        let dir = std::env::temp_dir().join("specfront_wav_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.wav");
        let samples: Vec<f64> = (0..100).map(|i| ((i as f64) * 0.13).sin() * 0.8).collect();
        write_wav_pcm16(&path, &samples, 16000).unwrap();
        let clip = parse_wav(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(clip.sample_rate_hz, 16000);
        assert_eq!(clip.samples.len(), samples.len());
        // Write scales by 32767, read divides by 32768; half an LSB of
        // rounding rides on top.
        for (a, b) in clip.samples.iter().zip(samples.iter()) {
            assert!((a - b).abs() < 1.5 / 16384.0);
        }
    }
}
