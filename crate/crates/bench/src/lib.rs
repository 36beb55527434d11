//! Shared input builders for the benchmark targets.

use specfront::signal_io::{synth_kws_clip, WaveformClip};

/// One deterministic 1-second keyword clip.
pub fn bench_clip() -> WaveformClip {
    synth_kws_clip(0, 3, 0).expect("toy clip")
}
