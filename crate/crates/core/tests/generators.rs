use fdrlink_core::dependence::normal::normal_quantile;
use fdrlink_core::dependence::{
    conditional_slope, equicorrelated_root_matrix, prdn_check_gaussian, two_sided_from_one_sided,
    Generator,
};
use fdrlink_core::mc::{replication_seed, simes_samples, McConfig};
use fdrlink_core::numeric::{ks_critical_value, ks_distance};
use fdrlink_core::{DMatrix, GeneratorSpec, Sidedness, WithinBlock};

const REPS: usize = 100_000;

fn columns(g: &Generator, reps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::with_capacity(reps); g.n0()];
    for r in 0..reps {
        let nulls = g.sample_nulls(replication_seed(seed, r as u64));
        for (c, p) in cols.iter_mut().zip(nulls) {
            c.push(p);
        }
    }
    cols
}

fn gaussian_specs() -> Vec<(&'static str, GeneratorSpec)> {
    let equi = |rho, sided| GeneratorSpec::EquicorrelatedNormal {
        n: 6,
        n0: 4,
        rho,
        sided,
        mu_alt: 2.0,
    };
    vec![
        ("equi one-sided rho=-1/3", equi(-1.0 / 3.0, Sidedness::One)),
        ("equi two-sided rho=0.6", equi(0.6, Sidedness::Two)),
        (
            "prdn gaussian",
            GeneratorSpec::PrdnGaussian {
                sigma: vec![
                    vec![1.0, 0.4, 0.2, -0.3],
                    vec![0.4, 1.0, 0.1, 0.2],
                    vec![0.2, 0.1, 1.0, 0.0],
                    vec![-0.3, 0.2, 0.0, 1.0],
                ],
                null_idx: vec![0, 1, 2],
                mu: vec![0.0, 0.0, 0.0, 1.5],
                sided: Sidedness::One,
            },
        ),
        (
            "block equi",
            GeneratorSpec::BlockDependent {
                block_sizes: vec![3, 2],
                max_block: 3,
                within: WithinBlock::Equicorrelated { rho: -0.4 },
                n0: 4,
                mu_alt: 2.0,
            },
        ),
        (
            "two-sided wrap",
            GeneratorSpec::TwoSidedWrap {
                inner: Box::new(equi(0.3, Sidedness::One)),
            },
        ),
    ]
}

#[test]
fn null_marginals_are_uniform() {
    let crit = ks_critical_value(REPS, 0.01);
    for (k, (name, spec)) in gaussian_specs().into_iter().enumerate() {
        let g = spec.prepare().unwrap();
        for (i, col) in columns(&g, REPS, 11 + k as u64).iter().enumerate() {
            let d = ks_distance(col, |x| x);
            assert!(d < crit, "{name} null {i}: KS {d} >= {crit}");
        }
    }
}

#[test]
fn two_sided_transform_preserves_uniformity() {
    let spec = GeneratorSpec::IidUniform { n0: 1, n1: 0, mu_alt: 2.0 };
    let g = spec.prepare().unwrap();
    let xs: Vec<f64> = columns(&g, REPS, 5)[0]
        .iter()
        .map(|&p| two_sided_from_one_sided(p).unwrap())
        .collect();
    assert!(ks_distance(&xs, |x| x) < ks_critical_value(REPS, 0.01));
}

#[test]
fn uncorrelated_scores_have_zero_sample_correlation() {
    let spec = GeneratorSpec::EquicorrelatedNormal {
        n: 2,
        n0: 2,
        rho: 0.0,
        sided: Sidedness::One,
        mu_alt: 2.0,
    };
    let g = spec.prepare().unwrap();
    let cols = columns(&g, REPS, 21);
    let z: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|&p| -normal_quantile(p)).collect()).collect();
    let m = REPS as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / m;
    let (m0, m1) = (mean(&z[0]), mean(&z[1]));
    let cov: f64 = z[0].iter().zip(&z[1]).map(|(a, b)| (a - m0) * (b - m1)).sum::<f64>() / m;
    let sd = |v: &[f64], mu: f64| (v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / m).sqrt();
    let r = cov / (sd(&z[0], m0) * sd(&z[1], m1));
    assert!(r.abs() < 3.0 / m.sqrt(), "correlation {r}");
}

#[test]
fn most_negative_equicorrelation_is_reproduced() {
    let n = 1000;
    let rho = -1.0 / 999.0;
    let spec = GeneratorSpec::EquicorrelatedNormal {
        n,
        n0: n,
        rho,
        sided: Sidedness::One,
        mu_alt: 2.0,
    };
    let g = spec.prepare().unwrap();
    let reps = 400;
    // Average over all pairs of z_i z_j in each draw.
    let per_draw: Vec<f64> = (0..reps)
        .map(|r| {
            let z: Vec<f64> = g
                .sample_nulls(replication_seed(3, r))
                .iter()
                .map(|&p| -normal_quantile(p))
                .collect();
            let s: f64 = z.iter().sum();
            let ss: f64 = z.iter().map(|x| x * x).sum();
            (s * s - ss) / (n * (n - 1)) as f64
        })
        .collect();
    let mean = per_draw.iter().sum::<f64>() / reps as f64;
    let var = per_draw.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!((mean - rho).abs() <= 3.0 * se + 1e-6, "mean pairwise product {mean}, se {se}");
}

#[test]
fn closed_form_root_is_exact_on_a_grid() {
    for &m in &[2usize, 3, 10, 100, 1000] {
        let lower = -1.0 / (m as f64 - 1.0);
        for &rho in &[lower, lower / 2.0, 0.0, 0.25, 0.9, 0.999] {
            let a = equicorrelated_root_matrix(m, rho).unwrap();
            let prod = &a * a.transpose();
            let target = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { rho });
            let rel = (&prod - &target).amax() / target.amax();
            assert!(rel <= 1e-12, "m={m} rho={rho}: relative error {rel}");
        }
    }
}

fn simes_cdf_dominated(spec: &GeneratorSpec, seed: u64) {
    let xs = simes_samples(spec, &McConfig::new(REPS, seed)).unwrap();
    let m = xs.len() as f64;
    for k in 1..100 {
        let x = k as f64 / 100.0;
        let f = xs.iter().filter(|&&s| s <= x).count() as f64 / m;
        let tol = 3.0 * (x * (1.0 - x) / m).sqrt();
        assert!(f <= x + tol, "{spec:?}: F({x}) = {f}");
    }
}

#[test]
fn simes_is_conservative_under_prdn_generators() {
    simes_cdf_dominated(
        &GeneratorSpec::EquicorrelatedNormal {
            n: 20,
            n0: 20,
            rho: 0.5,
            sided: Sidedness::One,
            mu_alt: 2.0,
        },
        31,
    );
    simes_cdf_dominated(&GeneratorSpec::IidUniform { n0: 20, n1: 0, mu_alt: 2.0 }, 32);
    let sigma = vec![
        vec![1.0, 0.3, 0.6, -0.5],
        vec![0.3, 1.0, 0.2, 0.1],
        vec![0.6, 0.2, 1.0, 0.0],
        vec![-0.5, 0.1, 0.0, 1.0],
    ];
    let null_idx = vec![0, 1, 2];
    let full = DMatrix::from_fn(4, 4, |i, j| sigma[i][j]);
    assert!(prdn_check_gaussian(&full, &null_idx).unwrap());
    simes_cdf_dominated(
        &GeneratorSpec::PrdnGaussian {
            sigma,
            null_idx,
            mu: vec![0.0, 0.0, 0.0, 2.0],
            sided: Sidedness::One,
        },
        33,
    );
}

#[test]
fn simes_is_exact_under_independence() {
    for (k, n0) in [1usize, 5, 50].into_iter().enumerate() {
        let xs = simes_samples(&GeneratorSpec::IidUniform { n0, n1: 0, mu_alt: 2.0 }, &McConfig::new(REPS, 40 + k as u64)).unwrap();
        assert!(ks_distance(&xs, |x| x) < ks_critical_value(REPS, 0.01), "n0={n0}");
    }
}

#[test]
fn identical_block_simes_is_uniform() {
    // All nulls equal: Simes p-value = p itself.
    let spec = GeneratorSpec::BlockDependent {
        block_sizes: vec![8],
        max_block: 8,
        within: WithinBlock::Identical,
        n0: 8,
        mu_alt: 2.0,
    };
    let xs = simes_samples(&spec, &McConfig::new(REPS, 50)).unwrap();
    assert!(ks_distance(&xs, |x| x) < ks_critical_value(REPS, 0.01));
}

#[test]
fn nonnegative_equicorrelation_has_nonnegative_slopes() {
    for &rho in &[0.0, 0.2, 0.7] {
        let sigma0 = DMatrix::from_fn(5, 5, |i, j| if i == j { 1.0 } else { rho });
        assert!(prdn_check_gaussian(&sigma0, &[0, 1, 2, 3, 4]).unwrap());
        for i in 0..5 {
            let slope = conditional_slope(&sigma0, i).unwrap();
            assert!(slope.iter().all(|&s| s >= 0.0 && (s - rho).abs() < 1e-15));
        }
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    for (_, spec) in gaussian_specs() {
        let g = spec.prepare().unwrap();
        assert_eq!(g.sample(99), g.sample(99));
        assert_ne!(g.sample(99), g.sample(100));
    }
}
