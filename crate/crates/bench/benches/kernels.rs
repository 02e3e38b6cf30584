use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use enn_bench::{batch, matrix, mnist_config, model, warm_state, wave};
use enn_core::cell::{self, Mode};
use enn_core::linalg;
use enn_core::model::Adam;
use enn_core::rng::{substream, Stream};
use enn_core::SequenceModel;

fn bench_matvec(c: &mut Criterion) {
    let mut g = c.benchmark_group("matvec");
    for &(r, k) in &[(128, 28), (128, 384), (64, 128)] {
        let m = matrix(r, k);
        let x = wave(k, 0.2);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{r}x{k}")), &(m, x), |b, (m, x)| {
            b.iter(|| linalg::matvec(black_box(m), black_box(x)).unwrap())
        });
    }
    g.finish();
}

fn bench_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("cell_step");
    for &(h, n) in &[(32, 16), (128, 64)] {
        let cfg = mnist_config(h, n);
        let m = model(&cfg);
        let state = warm_state(&cfg, &m);
        let x = wave(cfg.input_dim, 0.7);
        let mut rng = substream(1, Stream::Noise);
        g.bench_function(BenchmarkId::from_parameter(format!("h{h}_n{n}")), |b| {
            b.iter(|| cell::step(&cfg, &m.params.cell, black_box(&state), black_box(&x), Mode::Train, &mut rng).unwrap())
        });
    }
    g.finish();
}

fn bench_train_batch(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward_backward");
    g.sample_size(10);
    let cfg = mnist_config(128, 64);
    let m = model(&cfg);
    for &size in &[16, 128] {
        let data = batch(size);
        g.bench_function(BenchmarkId::from_parameter(format!("batch{size}")), |b| {
            let mut rng = substream(1, Stream::Noise);
            b.iter(|| {
                let mut memory = m.initial_memory();
                m.train_batch(&mut memory, black_box(&data), &mut rng).unwrap()
            })
        });
    }
    g.finish();
}

fn bench_adam(c: &mut Criterion) {
    let cfg = mnist_config(128, 64);
    let mut m = model(&cfg);
    let grads = m.params.clone();
    let mut opt = Adam::new(&m.params, 0.9, 0.999, 1e-7);
    c.bench_function("adam_step", |b| b.iter(|| opt.step(&mut m.params, black_box(&grads), 1e-9)));
}

criterion_group!(benches, bench_matvec, bench_step, bench_train_batch, bench_adam);
criterion_main!(benches);
