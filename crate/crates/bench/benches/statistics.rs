use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use scanalr_bench::noise_sums;
use scanalr_core::{
    build_condensed_family, condensed_alr, log_alr, scan, Detector, StatisticSuite,
};

fn condensed(c: &mut Criterion) {
    let mut group = c.benchmark_group("condensed_alr");
    group.sample_size(10);
    for n in [1_000usize, 10_000, 100_000] {
        let fam = build_condensed_family(n).unwrap();
        let s = noise_sums(n, 1);
        group.throughput(Throughput::Elements(fam.total_cardinality));
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| condensed_alr(black_box(s), &fam).unwrap())
        });
    }
    group.finish();
}

fn full_family(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_family");
    group.sample_size(10);
    for n in [1_000usize, 4_000] {
        let s = noise_sums(n, 2);
        group.throughput(Throughput::Elements((n * (n + 1) / 2) as u64));
        group.bench_with_input(BenchmarkId::new("log_alr", n), &s, |b, s| {
            b.iter(|| log_alr(black_box(s)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("scan", n), &s, |b, s| {
            b.iter(|| scan(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn suite(c: &mut Criterion) {
    let n = 1_000;
    let s = noise_sums(n, 3);
    let all = StatisticSuite::new(n, &Detector::ALL).unwrap();
    c.bench_function("suite_all_detectors_1000", |b| {
        b.iter(|| all.evaluate(black_box(&s)).unwrap())
    });
}

fn family_construction(c: &mut Criterion) {
    c.bench_function("build_condensed_family_1e6", |b| {
        b.iter(|| build_condensed_family(black_box(1_000_000)).unwrap())
    });
}

criterion_group!(benches, condensed, full_family, suite, family_construction);
criterion_main!(benches);
