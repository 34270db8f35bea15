//! Criterion benchmarks for the hot paths: distance kernels, probe labeling,
//! one training epoch, and curve evaluation.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use faceq_core::gallery::{partition, TemplatePolicy};
use faceq_core::labeler::{label_dataset, FailurePolicy};
use faceq_core::metrics::{curve, eer, linear_grid, PairSet};
use faceq_core::ops::euclidean_distance;
use faceq_core::synth::{generate, SynthSpec};
use faceq_core::trainer::{train, TrainConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn bench_distance(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(11);
    let a: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("euclidean_distance_dim128", |bench| {
        bench.iter(|| euclidean_distance(black_box(&a), black_box(&b)).unwrap())
    });
}

fn bench_label(c: &mut Criterion) {
    let spec = SynthSpec {
        n_subjects: 50,
        images_per_subject: 10,
        dim: 64,
        seed: 3,
        ..SynthSpec::default()
    };
    let (data, _truth) = generate(&spec).unwrap();
    let split = partition(&data, TemplatePolicy::First, 3).unwrap();
    c.bench_function("label_dataset_50x10_dim64", |bench| {
        bench.iter(|| label_dataset(black_box(&split), FailurePolicy::FailFast).unwrap())
    });
}

fn bench_train_epoch(c: &mut Criterion) {
    let spec = SynthSpec {
        n_subjects: 50,
        images_per_subject: 10,
        dim: 64,
        seed: 5,
        ..SynthSpec::default()
    };
    let (data, _truth) = generate(&spec).unwrap();
    let split = partition(&data, TemplatePolicy::First, 5).unwrap();
    let labeling = label_dataset(&split, FailurePolicy::FailFast).unwrap();
    let config = TrainConfig {
        epochs: 1,
        seed: 5,
        ..TrainConfig::default()
    };
    c.bench_function("train_one_epoch_450_dim64", |bench| {
        bench.iter(|| train(black_box(&labeling.labels), black_box(&data), &config).unwrap())
    });
}

fn bench_curve(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(7);
    let same: Vec<f64> = (0..20_000).map(|_| rng.random_range(0.0..1.5)).collect();
    let diff: Vec<f64> = (0..20_000).map(|_| rng.random_range(0.5..3.0)).collect();
    let pairs = PairSet::from_distances(same, diff).unwrap();
    let grid = linear_grid(3.0, 512).unwrap();
    c.bench_function("curve_and_eer_40k_pairs_512_grid", |bench| {
        bench.iter(|| {
            let cv = curve(black_box(&pairs), black_box(&grid)).unwrap();
            eer(&cv).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_distance,
    bench_label,
    bench_train_epoch,
    bench_curve
);
criterion_main!(benches);
