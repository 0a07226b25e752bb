//! Each workload runs inside a one-thread rayon pool ("sequential") and in
//! the global pool ("parallel"). Building with `--no-default-features`
//! compiles the plain sequential code paths instead; this bench needs the
//! `parallel` feature to have two pools to compare.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fairrisk::boost::{self, BoostConfig};
use fairrisk::forest::{ForestConfig, RegressionForest};
use fairrisk::synth::{self, SynthConfig};
use fairrisk::tabular::{filter_group, Group};
use fairrisk::transport::{apply_map_all, batched_fit_map, BatchOptions};
use rayon::ThreadPoolBuilder;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("sequential", ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn bench_all(c: &mut Criterion) {
    let data = synth::generate(&SynthConfig {
        n_per_group: 2000,
        ..SynthConfig::default()
    })
    .unwrap();
    let base = filter_group(&data, Group::Baseline);
    let comp = filter_group(&data, Group::Comparison);
    let (bx, cx) = (base.covariates(), comp.covariates());
    let target = base.column(1);

    let forest_cfg = ForestConfig {
        n_trees: 100,
        ..ForestConfig::default()
    };
    let batch = BatchOptions {
        n_batches: 4,
        batch_size: 200,
        forest: ForestConfig {
            n_trees: 50,
            ..ForestConfig::default()
        },
        ..BatchOptions::default()
    };
    let map = batched_fit_map(&cx, &bx, &batch, 1).unwrap();
    let model = boost::train(
        &base,
        &BoostConfig {
            n_trees: 100,
            ..BoostConfig::default()
        },
    )
    .unwrap();

    let mut g = c.benchmark_group("forest_fit");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| RegressionForest::fit(black_box(&bx), &target, &forest_cfg).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("batched_transport");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| batched_fit_map(black_box(&cx), &bx, &batch, 1).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("apply_map");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| apply_map_all(&map, black_box(&cx)).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("calibration_scores");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| fairrisk::conformal::calibrate(&model, black_box(&base), 0.05).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_all);
criterion_main!(benches);
