use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hillsignal::eval::{auc, delong_compare, partial_auc, RocCurve};
use hillsignal_bench::{by_label, scored};

fn metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("metrics");
    for n in [1_000, 10_000, 100_000] {
        let (a, b, labels) = scored(n, 7);
        let (pos, neg) = by_label(&a, &labels);
        group.bench_with_input(BenchmarkId::new("auc", n), &n, |bench, _| {
            bench.iter(|| auc(black_box(&pos), black_box(&neg)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("partial_auc", n), &n, |bench, _| {
            bench.iter(|| partial_auc(black_box(&pos), black_box(&neg), 0.8, 1.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("roc", n), &n, |bench, _| {
            bench.iter(|| RocCurve::new(black_box(&pos), black_box(&neg)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("delong", n), &n, |bench, _| {
            bench.iter(|| delong_compare(black_box(&a), black_box(&b), black_box(&labels)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, metrics);
criterion_main!(benches);
