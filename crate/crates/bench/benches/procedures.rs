use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fdrlink_core::adversaries::AdversarySpec;
use fdrlink_core::bounds::fdr_link_bound;
use fdrlink_core::mc::{d_alpha_path, fdp_with_extreme_non_nulls, DAlphaTruncation, Procedure};
use fdrlink_core::testing::{bh_step_up, max_fdp_compliant};
use fdrlink_core::{EmpiricalCdf, Fdr0Curve, GeneratorSpec, PValueStudy, Sidedness};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniforms(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn procedures(c: &mut Criterion) {
    let mut g = c.benchmark_group("procedures");
    for n in [1_000usize, 100_000] {
        let p = uniforms(n, 1);
        let study = PValueStudy::with_leading_nulls(p, n / 10).unwrap();
        g.bench_with_input(BenchmarkId::new("bh_step_up", n), &study, |b, s| {
            b.iter(|| bh_step_up(black_box(s), 0.1).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("max_fdp_compliant", n), &study, |b, s| {
            b.iter(|| max_fdp_compliant(black_box(s), 0.1).unwrap())
        });
    }
    let nulls = uniforms(1000, 2);
    let zeros = AdversarySpec::Informed.zeros_for(&nulls, 10_000, 0.05).unwrap().1;
    g.bench_function("informed_fdp_n0_1000_n1_10000", |b| {
        b.iter(|| fdp_with_extreme_non_nulls(black_box(&nulls), zeros, 10_000, 0.05, Procedure::StepUp).unwrap())
    });
    g.finish();
}

fn bounds(c: &mut Criterion) {
    let curve = Fdr0Curve::Empirical(EmpiricalCdf::from_samples(uniforms(100_000, 3)).unwrap());
    c.bench_function("fdr_link_bound_empirical_1e5", |b| {
        b.iter(|| fdr_link_bound(0.9, black_box(0.05), &curve).unwrap())
    });
}

fn generators(c: &mut Criterion) {
    let mut g = c.benchmark_group("generators");
    let specs = [
        ("iid_1000", GeneratorSpec::IidUniform { n0: 1000, n1: 1000, mu_alt: 2.0 }),
        (
            "equicorrelated_1000",
            GeneratorSpec::EquicorrelatedNormal {
                n: 2000,
                n0: 1000,
                rho: 0.3,
                sided: Sidedness::One,
                mu_alt: 2.0,
            },
        ),
        (
            "prdn_gaussian_100",
            GeneratorSpec::PrdnGaussian {
                sigma: (0..100)
                    .map(|i: i32| (0..100).map(|j| 0.5f64.powi((i - j).abs())).collect())
                    .collect(),
                null_idx: (0..80).collect(),
                mu: (0..100).map(|i| if i < 80 { 0.0 } else { 2.0 }).collect(),
                sided: Sidedness::Two,
            },
        ),
    ];
    for (name, spec) in specs {
        let gen = spec.prepare().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        g.bench_function(name, |b| b.iter(|| gen.draw(&mut rng)));
    }
    g.finish();
}

fn d_alpha(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for alpha in [0.1, 0.01] {
        c.bench_function(&format!("d_alpha_path_{alpha}"), |b| {
            b.iter(|| d_alpha_path(&mut rng, black_box(alpha), DAlphaTruncation::default()))
        });
    }
}

criterion_group!(benches, procedures, bounds, generators, d_alpha);
criterion_main!(benches);
