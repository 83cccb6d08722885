use std::hint::black_box;

use bellkey::boxes::{NsBox, Visibility};
use bellkey::polytope::min_nonlocal_decomposition;
use bellkey::rates::{self, ad_stats, intrinsic_numeric, IntrinsicConfig};
use bellkey::simulate::run_tally;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn decomposition(c: &mut Criterion) {
    let b = NsBox::isotropic(Visibility::new(0.8).unwrap());
    c.bench_function("min_nonlocal_decomposition", |bench| {
        bench.iter(|| min_nonlocal_decomposition(black_box(&b)).unwrap())
    });
}

fn intrinsic(c: &mut Criterion) {
    let blocks = rates::table_one_blocks(0.5).unwrap();
    let mut group = c.benchmark_group("intrinsic_numeric");
    group.sample_size(10);
    for restarts in [1, 8] {
        let cfg = IntrinsicConfig {
            restarts,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(restarts), &cfg, |bench, cfg| {
            bench.iter(|| intrinsic_numeric(black_box(&blocks), cfg).unwrap())
        });
    }
    group.finish();
}

fn advantage(c: &mut Criterion) {
    let blocks = rates::table_one_blocks(0.25).unwrap();
    let mut group = c.benchmark_group("ad_stats");
    for n in [5, 15, 30] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, &n| {
            bench.iter(|| ad_stats(black_box(&blocks), n).unwrap())
        });
    }
    group.finish();
}

fn preprocessing(c: &mut Criterion) {
    c.bench_function("optimize_preprocessing", |bench| {
        bench.iter(|| rates::optimize_preprocessing(black_box(0.3)).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let v = Visibility::new(0.8).unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("run_tally_100k", |bench| {
        bench.iter(|| run_tally(v, black_box(100_000), 1).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    decomposition,
    intrinsic,
    advantage,
    preprocessing,
    simulation
);
criterion_main!(benches);
