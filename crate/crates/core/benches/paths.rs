use chgpt_core::exec;
use chgpt_core::model::{Intensity, ModelSpec, RandomTimeSpec, RegimeCoefficients, TimeGrid};
use chgpt_core::sde::simulate_path;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn spec() -> ModelSpec {
    ModelSpec::new(
        TimeGrid::new(1.0, 1024).unwrap(),
        RegimeCoefficients::constant(0.05, 0.0, 0.2, 0.4),
        RandomTimeSpec::Cox(Intensity::Constant(2.0)),
    )
    .with_rho(0.5)
}

fn terminal(spec: &ModelSpec, i: usize) -> f64 {
    *simulate_path(spec, 1, i).unwrap().x.last().unwrap()
}

fn simulation(c: &mut Criterion) {
    let spec = spec();
    let n = 2000;
    let mut g = c.benchmark_group("simulate_2000_paths");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("sequential", n), |b| {
        b.iter(|| exec::sequential::map_indexed(n, |i| terminal(&spec, i)))
    });
    #[cfg(feature = "parallel")]
    g.bench_function(BenchmarkId::new("parallel", n), |b| {
        b.iter(|| exec::parallel::map_indexed(n, |i| terminal(&spec, i)))
    });
    g.finish();
}

/// Normal-equation accumulation over chunks, as the hedge regression does.
fn accumulation(c: &mut Criterion) {
    let n: usize = 200_000;
    let row = |i: usize| {
        let x = (i as f64 * 1e-3).sin();
        [1.0, x, x * x, x * x * x]
    };
    let fold_chunk = |lo: usize, hi: usize| {
        let mut acc = [0.0f64; 16];
        for i in lo..hi {
            let f = row(i);
            for a in 0..4 {
                for b in 0..4 {
                    acc[4 * a + b] += f[a] * f[b];
                }
            }
        }
        acc
    };
    let chunks = n.div_ceil(exec::DEFAULT_CHUNK);
    let combine = |mut a: [f64; 16], b: [f64; 16]| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    let chunk = |c: usize| fold_chunk(c * exec::DEFAULT_CHUNK, ((c + 1) * exec::DEFAULT_CHUNK).min(n));
    let mut g = c.benchmark_group("normal_equations_200k_rows");
    g.bench_function("sequential", |b| {
        b.iter(|| exec::pairwise_reduce(exec::sequential::map_indexed(chunks, chunk), combine))
    });
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| {
        b.iter(|| exec::pairwise_reduce(exec::parallel::map_indexed(chunks, chunk), combine))
    });
    g.finish();
}

criterion_group!(benches, simulation, accumulation);
criterion_main!(benches);
