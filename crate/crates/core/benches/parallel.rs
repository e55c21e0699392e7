use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use phasesync::bvp::{self, BvpOptions};
use phasesync::{density_exact, estimate_lyapunov_mc, ConstraintParams, NoiseAmplitude, Prc};

#[cfg(feature = "parallel")]
fn pools() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("rayon", None), ("sequential", Some(single))]
}

#[cfg(not(feature = "parallel"))]
fn pools() -> Vec<(&'static str, Option<()>)> {
    vec![("sequential", None)]
}

#[cfg(feature = "parallel")]
fn run<T: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> T + Send) -> T {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run<T>(_: &Option<()>, f: impl FnOnce() -> T) -> T {
    f()
}

fn bench(c: &mut Criterion) {
    let prc = Prc::type2();
    let sigma = NoiseAmplitude::new(0.1).unwrap();
    let weights = ConstraintParams::new(1.0, 1.0, 0.0).unwrap();
    let sigmas: Vec<f64> = (1..=8).map(|i| 0.025 * i as f64).collect();
    let mut group = c.benchmark_group("parallel");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("lyapunov_mc", name), |b| {
            b.iter(|| run(&pool, || estimate_lyapunov_mc(&prc, sigma, 20.0, 1e-3, 32, 1).unwrap()))
        });
        group.bench_function(BenchmarkId::new("density_exact", name), |b| {
            b.iter(|| run(&pool, || density_exact(&prc, sigma, 512).unwrap()))
        });
        group.bench_function(BenchmarkId::new("solve_many", name), |b| {
            b.iter(|| run(&pool, || bvp::solve_many(&weights, &sigmas, &BvpOptions::default())))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
