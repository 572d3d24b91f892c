//! One worker against the default pool on the two hot paths. Build with
//! `--no-default-features` to time the plain iterator fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use modspace::experiments::{dilation_scan, log_grid, Family};
use modspace::extremals::gauss;
use modspace::grid::{sample, BoxGrid};
use modspace::indices::ExponentPair;
use modspace::norms::mixed_norms_of_signal;
use modspace::par;
use modspace::stft::{Lattice, Window};

const POOLS: [(&str, usize); 2] = [("one-worker", 1), ("default-pool", 0)];
const BACKEND: &str = if cfg!(feature = "parallel") { "rayon" } else { "iter" };

fn stft_norms(c: &mut Criterion) {
    let g = BoxGrid::new(1, 16.0, 2048).unwrap();
    let s = sample(&gauss(1), &g).unwrap();
    let pqs = [ExponentPair::ints(2, 2), ExponentPair::ints(1, 1)];
    let w = Window::gauss(1);
    let mut group = c.benchmark_group("mixed_norms_of_signal");
    for (name, workers) in POOLS {
        group.bench_function(BenchmarkId::new(name, BACKEND), |b| {
            b.iter(|| par::with_workers(workers, || mixed_norms_of_signal(&s, &pqs, &w, &Lattice::dense()).unwrap()))
        });
    }
    group.finish();
}

fn scan(c: &mut Criterion) {
    let pqs = [ExponentPair::ints(2, 2)];
    let lambdas = log_grid(1.0, 8.0, 1);
    let mut group = c.benchmark_group("dilation_scan");
    group.sample_size(10);
    for (name, workers) in POOLS {
        group.bench_function(BenchmarkId::new(name, BACKEND), |b| {
            b.iter(|| par::with_workers(workers, || dilation_scan(&Family::Gauss, &pqs, &lambdas, 1).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, stft_norms, scan);
criterion_main!(benches);
