//! Parallel vs sequential throughput for the per-window hot paths:
//! the neighborhood outlier filter and feature extraction. The
//! sequential baseline pins rayon to one thread so both sides run the
//! same code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use econlob::book::{build_book, OverdrawPolicy, DEFAULT_DEPTH};
use econlob::cleaning::{outlier_filter, FilterParams};
use econlob::features::{extract_features, extract_features_seq, CleanedDay, FeatureConfig};
use econlob::synth::{generate_messages, SynthConfig};
use econlob::types::BookSnapshot;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn synthetic_prices(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut price = 100.0f64;
    (0..n)
        .map(|_| {
            price += rng.gen_range(-0.05..0.05);
            price
        })
        .collect()
}

fn synthetic_day(n_steps: usize) -> Vec<BookSnapshot> {
    let (events, _) = generate_messages(&SynthConfig {
        n_steps,
        seed: 5,
        ..SynthConfig::default()
    })
    .expect("generator config is valid");
    build_book(&events, DEFAULT_DEPTH, OverdrawPolicy::ClampWarn)
        .expect("clean stream")
        .0
}

fn bench_outlier_filter(c: &mut Criterion) {
    let mut group = c.benchmark_group("outlier_filter");
    let params = FilterParams::default();
    for &n in &[10_000usize, 50_000] {
        let prices = synthetic_prices(n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &prices, |b, p| {
            b.iter(|| outlier_filter(p, &params).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &prices, |b, p| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap();
            b.iter(|| pool.install(|| outlier_filter(p, &params).unwrap()))
        });
    }
    group.finish();
}

fn bench_feature_extraction(c: &mut Criterion) {
    let mut group = c.benchmark_group("feature_extraction");
    group.sample_size(10);
    for &steps in &[1_000usize, 5_000] {
        let snaps = synthetic_day(steps);
        let day = CleanedDay::from_snapshots(&snaps, None);
        let config = FeatureConfig::default();
        let raw_len = snaps.len();
        group.bench_with_input(BenchmarkId::new("parallel", steps), &day, |b, d| {
            b.iter(|| extract_features(d, raw_len, &config).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", steps), &day, |b, d| {
            b.iter(|| extract_features_seq(d, raw_len, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_outlier_filter, bench_feature_extraction);
criterion_main!(benches);
