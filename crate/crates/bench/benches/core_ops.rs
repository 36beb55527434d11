use criterion::{criterion_group, criterion_main, Criterion};
use specfront::frontend::{
    init_mel_freeform, init_stft_kernels_default, mel_backward, mel_forward, stft_backward,
    stft_forward,
};
use specfront::losses::{ctc_loss, log_softmax_rows, CtcTarget};
use specfront::mat::Mat;
use specfront::models::LstmLayer;
use specfront_bench::bench_clip;
use std::hint::black_box;

fn bench_stft(c: &mut Criterion) {
    let bank = init_stft_kernels_default();
    let clip = bench_clip();

    c.bench_function("stft_forward_1s", |b| {
        b.iter(|| stft_forward(black_box(&clip.samples), &bank).unwrap())
    });

    let (mag, cache) = stft_forward(&clip.samples, &bank).unwrap();
    let upstream = Mat::from_fn(mag.frames.rows(), mag.frames.cols(), |t, k| {
        ((t + k) as f64 * 0.1).sin()
    });
    c.bench_function("stft_backward_kernels_1s", |b| {
        b.iter(|| stft_backward(black_box(&upstream), &cache, &bank, false).unwrap())
    });
}

fn bench_mel(c: &mut Criterion) {
    let bank = init_stft_kernels_default();
    let mel = init_mel_freeform(40, 0.0, 8000.0, 241).unwrap();
    let clip = bench_clip();
    let (mag, _) = stft_forward(&clip.samples, &bank).unwrap();

    c.bench_function("mel_forward_1s_40", |b| {
        b.iter(|| mel_forward(black_box(&mag), &mel).unwrap())
    });

    let xf = mel_forward(&mag, &mel).unwrap();
    let upstream = Mat::from_fn(xf.frames.rows(), xf.frames.cols(), |t, j| {
        ((t * 7 + j) as f64 * 0.2).cos()
    });
    c.bench_function("mel_backward_1s_40", |b| {
        b.iter(|| mel_backward(black_box(&upstream), &mag, &mel, true).unwrap())
    });
}

fn bench_lstm(c: &mut Criterion) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let layer = LstmLayer::init(40, 64, &mut rng);
    let x = Mat::from_fn(101, 40, |t, d| ((t * 40 + d) as f64 * 0.01).sin());

    c.bench_function("lstm_forward_101x40_h64", |b| {
        b.iter(|| layer.forward(black_box(&x)).unwrap())
    });

    let (h, cache) = layer.forward(&x).unwrap();
    let upstream = Mat::from_fn(h.rows(), h.cols(), |t, u| ((t + u) as f64 * 0.03).cos());
    c.bench_function("lstm_backward_101x40_h64", |b| {
        b.iter(|| layer.backward(black_box(&upstream), &cache).unwrap())
    });
}

fn bench_ctc(c: &mut Criterion) {
    let logits = Mat::from_fn(101, 62, |t, k| ((t * 62 + k) as f64 * 0.017).sin());
    let log_probs = log_softmax_rows(&logits);
    let target = CtcTarget::new(vec![5, 17, 3, 42, 9, 30]).unwrap();

    c.bench_function("ctc_loss_101x62_len6", |b| {
        b.iter(|| ctc_loss(black_box(&log_probs), &target, 61).unwrap())
    });
}

criterion_group!(benches, bench_stft, bench_mel, bench_lstm, bench_ctc);
criterion_main!(benches);
