use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spikelab_core::experiments::largest_singular_value;
use spikelab_core::sampling::{sample_eta, sample_gaussian, sample_haar_unitary, sample_truncated_block};
use spikelab_core::{RngStream, Spectrum};

fn blocks(c: &mut Criterion) {
    let mut group = c.benchmark_group("block");
    let mut rng = RngStream::new(7, 0).rng();
    for n in [6, 16, 64] {
        group.bench_with_input(BenchmarkId::new("truncated_r3", n), &n, |b, &n| {
            b.iter(|| sample_truncated_block(n, 3, &mut rng).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("haar_unitary", n), &n, |b, &n| {
            b.iter(|| sample_haar_unitary(n, &mut rng).unwrap())
        });
    }
    group.finish();
}

fn eta(c: &mut Criterion) {
    let s = Spectrum::new(vec![1.0, 0.7, 0.2]).unwrap();
    let mut rng = RngStream::new(7, 1).rng();
    c.bench_function("eta_sample_n6", |b| b.iter(|| sample_eta(&s, 6, &mut rng).unwrap()));
}

fn detection_statistic(c: &mut Criterion) {
    let mut group = c.benchmark_group("lambda1");
    group.sample_size(10);
    let mut rng = RngStream::new(7, 2).rng();
    for n in [100, 500] {
        let z = sample_gaussian(n, n, 1.0 / n as f64, &mut rng).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &z, |b, z| b.iter(|| largest_singular_value(z)));
    }
    group.finish();
}

criterion_group!(benches, blocks, eta, detection_statistic);
criterion_main!(benches);
