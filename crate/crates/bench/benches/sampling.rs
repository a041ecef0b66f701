use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use midist_bench::table;
use midist_core::{mc_estimate, sample_mi};

fn sampling(c: &mut Criterion) {
    let t = table(4, 5, 500.0);
    let n = 100_000;
    let mut g = c.benchmark_group("mc");
    g.sample_size(10);
    g.throughput(Throughput::Elements(n as u64));
    g.bench_function("sample_mi/4x5", |b| b.iter(|| sample_mi(black_box(&t), n, 1)));
    g.bench_function("mc_estimate/4x5", |b| {
        b.iter(|| mc_estimate(black_box(&t), n, 1, &[0.01, 0.05]))
    });
    g.finish();
}

criterion_group!(benches, sampling);
criterion_main!(benches);
