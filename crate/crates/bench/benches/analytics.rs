use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spikelab_core::grf::{grf, grf_curve, rate_gap_sup, uniform_grid, waterfill};
use spikelab_core::oracle::{solve_problem1, solve_problem3_grid, solve_problem4_search};
use spikelab_core::{RngStream, Spectrum};

fn closed_forms(c: &mut Criterion) {
    let mut group = c.benchmark_group("closed_form");
    for values in [vec![0.9], vec![1.0, 0.7, 0.2], vec![2.0, 1.5, 1.1, 0.8, 0.6, 0.3, 0.2, 0.1]] {
        let s = Spectrum::new(values).unwrap();
        let x = 0.6 * s.eta_max();
        let r = s.rank();
        group.bench_with_input(BenchmarkId::new("grf", r), &s, |b, s| b.iter(|| grf(s, x).unwrap()));
        group.bench_with_input(BenchmarkId::new("waterfill", r), &s, |b, s| b.iter(|| waterfill(s, x).unwrap()));
        group.bench_with_input(BenchmarkId::new("rate_gap_sup", r), &s, |b, s| {
            b.iter(|| rate_gap_sup(s, 0.01).unwrap())
        });
        let grid = uniform_grid(&s, 1000);
        group.bench_with_input(BenchmarkId::new("curve_1000", r), &s, |b, s| b.iter(|| grf_curve(s, &grid).unwrap()));
    }
    group.finish();
}

fn oracles(c: &mut Criterion) {
    let s = Spectrum::new(vec![1.0, 0.7, 0.2]).unwrap();
    let x = 0.8;
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("problem1", |b| b.iter(|| solve_problem1(&s, x, 100_000, RngStream::new(1, 0)).unwrap()));
    group.bench_function("problem3_grid", |b| b.iter(|| solve_problem3_grid(&s, x, 400).unwrap()));
    group.bench_function("problem4", |b| {
        b.iter(|| solve_problem4_search(&s, x, 100_000, RngStream::new(1, 0)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, closed_forms, oracles);
criterion_main!(benches);
