//! P-value generators for the dependence classes, plus structural checks.
//!
//! Every generator draws the null p-values first and the non-nulls after, so
//! `Generator::draw_nulls` and `Generator::draw` agree on the nulls for the
//! same RNG state. Nulls occupy the leading indices except for
//! `PrdnGaussian`, where `null_idx` decides.

pub mod normal;
mod signs;
pub mod structure;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FdrError, Result};
use crate::testing::PValueStudy;
use normal::normal_sf;
pub use structure::{
    conditional_covariance, conditional_slope, mtp2_sign_check, negative_precision,
    parse_dense_matrix, prdn_check_gaussian, prds_check_gaussian, psd_sqrt, validate_correlation,
    SignAssignment,
};

pub const DEFAULT_MU_ALT: f64 = 2.0;

fn default_mu_alt() -> f64 {
    DEFAULT_MU_ALT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    One,
    Two,
}

/// Joint law inside one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum WithinBlock {
    /// Every member of the block shares one statistic.
    Identical,
    Equicorrelated { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Independent uniform nulls; non-null statistics `N(mu_alt, 1)`.
    IidUniform {
        n0: usize,
        n1: usize,
        #[serde(default = "default_mu_alt")]
        mu_alt: f64,
    },
    /// Equicorrelated null statistics; independent `N(mu_alt, 1)` non-nulls.
    EquicorrelatedNormal {
        n: usize,
        n0: usize,
        rho: f64,
        #[serde(default)]
        sided: Sidedness,
        #[serde(default = "default_mu_alt")]
        mu_alt: f64,
    },
    /// `X ~ N(mu, sigma)` with unit-diagonal `sigma` and `mu` zero on nulls.
    PrdnGaussian {
        sigma: Vec<Vec<f64>>,
        null_idx: Vec<usize>,
        mu: Vec<f64>,
        #[serde(default)]
        sided: Sidedness,
    },
    /// Independent consecutive blocks; the first `n0` indices are nulls.
    BlockDependent {
        block_sizes: Vec<usize>,
        max_block: usize,
        within: WithinBlock,
        n0: usize,
        #[serde(default = "default_mu_alt")]
        mu_alt: f64,
    },
    /// `two_sided_from_one_sided` applied to every p-value of `inner`.
    TwoSidedWrap { inner: Box<GeneratorSpec> },
}

/// Lower end of the admissible equicorrelation range for `m` variables.
pub fn min_equicorrelation(m: usize) -> f64 {
    if m <= 1 {
        -1.0
    } else {
        -1.0 / (m as f64 - 1.0)
    }
}

fn check_rho(rho: f64, m: usize) -> Result<()> {
    let lower = min_equicorrelation(m);
    if rho.is_finite() && rho >= lower && rho < 1.0 {
        Ok(())
    } else {
        Err(FdrError::CorrelationOutOfRange { rho, lower })
    }
}

/// `(a, b)` with `(a I + b 11^T)^2` equal to the `m x m` equicorrelation
/// matrix: `a = sqrt(1 - rho)`, `b = (sqrt(1 + (m - 1) rho) - a) / m`.
pub fn equicorrelated_root(m: usize, rho: f64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(FdrError::Empty("equicorrelated block"));
    }
    check_rho(rho, m)?;
    let a = (1.0 - rho).sqrt();
    let top = (1.0 + (m as f64 - 1.0) * rho).max(0.0).sqrt();
    Ok((a, (top - a) / m as f64))
}

/// Dense `a I + b 11^T`.
pub fn equicorrelated_root_matrix(m: usize, rho: f64) -> Result<DMatrix<f64>> {
    let (a, b) = equicorrelated_root(m, rho)?;
    Ok(DMatrix::from_fn(m, m, |i, j| if i == j { a + b } else { b }))
}

fn apply_root(a: f64, b: f64, eps: &mut [f64]) {
    let shared = b * eps.iter().sum::<f64>();
    for e in eps.iter_mut() {
        *e = a * *e + shared;
    }
}

/// `2p` for `p <= 1/2`, else `2(1 - p)`.
pub fn two_sided_from_one_sided(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FdrError::InvalidPValue { index: 0, value: p });
    }
    Ok(two_sided(p))
}

fn two_sided(p: f64) -> f64 {
    if p <= 0.5 {
        2.0 * p
    } else {
        2.0 * (1.0 - p)
    }
}

/// `min(b_l * min_{i in block l} p_i, 1)` for consecutive blocks of the
/// given sizes.
pub fn block_adjusted_pvalues(study: &PValueStudy, block_sizes: &[usize]) -> Result<Vec<f64>> {
    let total: usize = block_sizes.iter().sum();
    if total != study.n() || block_sizes.contains(&0) {
        return Err(FdrError::InvalidArgument(format!(
            "block sizes {block_sizes:?} do not partition {} p-values",
            study.n()
        )));
    }
    let mut start = 0;
    Ok(block_sizes
        .iter()
        .map(|&b| {
            let block = &study.pvalues()[start..start + b];
            start += b;
            let min = block.iter().copied().fold(f64::INFINITY, f64::min);
            (b as f64 * min).min(1.0)
        })
        .collect())
}

/// Growth schedule `n = max(ceil(scale * l * ln(max(l, 2))), l)`, `n0 = l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingSchedule {
    pub scale: f64,
}

impl Default for VanishingSchedule {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

/// `(n, n0)` for member `l >= 1` of a family with vanishing null proportion.
pub fn vanishing_null_family(l: usize, schedule: VanishingSchedule) -> (usize, usize) {
    let l = l.max(1);
    let lf = l as f64;
    let n = (schedule.scale * lf * lf.max(2.0).ln()).ceil() as usize;
    (n.max(l), l)
}

impl GeneratorSpec {
    pub fn n(&self) -> usize {
        match self {
            GeneratorSpec::IidUniform { n0, n1, .. } => n0 + n1,
            GeneratorSpec::EquicorrelatedNormal { n, .. } => *n,
            GeneratorSpec::PrdnGaussian { sigma, .. } => sigma.len(),
            GeneratorSpec::BlockDependent { block_sizes, .. } => block_sizes.iter().sum(),
            GeneratorSpec::TwoSidedWrap { inner } => inner.n(),
        }
    }

    pub fn n0(&self) -> usize {
        match self {
            GeneratorSpec::IidUniform { n0, .. }
            | GeneratorSpec::EquicorrelatedNormal { n0, .. }
            | GeneratorSpec::BlockDependent { n0, .. } => *n0,
            GeneratorSpec::PrdnGaussian { null_idx, .. } => null_idx.len(),
            GeneratorSpec::TwoSidedWrap { inner } => inner.n0(),
        }
    }

    pub fn n1(&self) -> usize {
        self.n() - self.n0().min(self.n())
    }

    pub fn pi0(&self) -> f64 {
        self.n0() as f64 / self.n() as f64
    }

    /// The same spec with every non-null removed.
    pub fn nulls_only(&self) -> Result<GeneratorSpec> {
        self.validate()?;
        Ok(match self {
            GeneratorSpec::IidUniform { n0, mu_alt, .. } => GeneratorSpec::IidUniform {
                n0: *n0,
                n1: 0,
                mu_alt: *mu_alt,
            },
            GeneratorSpec::EquicorrelatedNormal {
                n0,
                rho,
                sided,
                mu_alt,
                ..
            } => GeneratorSpec::EquicorrelatedNormal {
                n: *n0,
                n0: *n0,
                rho: *rho,
                sided: *sided,
                mu_alt: *mu_alt,
            },
            GeneratorSpec::PrdnGaussian {
                sigma,
                null_idx,
                sided,
                ..
            } => {
                let mut idx = null_idx.clone();
                idx.sort_unstable();
                GeneratorSpec::PrdnGaussian {
                    sigma: idx
                        .iter()
                        .map(|&i| idx.iter().map(|&j| sigma[i][j]).collect())
                        .collect(),
                    null_idx: (0..idx.len()).collect(),
                    mu: vec![0.0; idx.len()],
                    sided: *sided,
                }
            }
            GeneratorSpec::BlockDependent {
                block_sizes,
                max_block,
                within,
                n0,
                mu_alt,
            } => {
                let mut sizes = Vec::new();
                let mut left = *n0;
                for &b in block_sizes {
                    if left == 0 {
                        break;
                    }
                    sizes.push(b.min(left));
                    left -= b.min(left);
                }
                GeneratorSpec::BlockDependent {
                    block_sizes: sizes,
                    max_block: *max_block,
                    within: *within,
                    n0: *n0,
                    mu_alt: *mu_alt,
                }
            }
            GeneratorSpec::TwoSidedWrap { inner } => GeneratorSpec::TwoSidedWrap {
                inner: Box::new(inner.nulls_only()?),
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    /// Checks the spec and caches the factors needed for sampling.
    pub fn prepare(&self) -> Result<Generator> {
        let kind = Prepared::new(self)?;
        Ok(Generator {
            spec: self.clone(),
            kind,
        })
    }
}

/// Draws one study. Equivalent to `spec.prepare()?.sample(seed)`.
pub fn sample(spec: &GeneratorSpec, seed: u64) -> Result<PValueStudy> {
    Ok(spec.prepare()?.sample(seed))
}

/// A validated spec with cached factorizations. Immutable; sampling takes
/// the RNG by reference.
#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    kind: Prepared,
}

#[derive(Debug, Clone)]
enum Prepared {
    Iid {
        n0: usize,
        n1: usize,
        mu_alt: f64,
    },
    Equi {
        n0: usize,
        n1: usize,
        a: f64,
        b: f64,
        sided: Sidedness,
        mu_alt: f64,
    },
    Gaussian(Box<GaussianFactors>),
    Block {
        sizes: Vec<usize>,
        roots: Vec<(f64, f64)>,
        identical: bool,
        n0: usize,
        mu_alt: f64,
    },
    TwoSided(Box<Prepared>),
}

/// Block lower-triangular factor `[[l0, 0], [m, l1]]` of `sigma` permuted to
/// nulls-first order.
#[derive(Debug, Clone)]
struct GaussianFactors {
    null_idx: Vec<usize>,
    alt_idx: Vec<usize>,
    alt_mu: Vec<f64>,
    l0: DMatrix<f64>,
    m: DMatrix<f64>,
    l1: DMatrix<f64>,
    sided: Sidedness,
}

fn pvalue_of(z: f64, sided: Sidedness) -> f64 {
    match sided {
        Sidedness::One => normal_sf(z),
        Sidedness::Two => (2.0 * normal_sf(z.abs())).min(1.0),
    }
}

fn gaussian_factors(
    sigma: &[Vec<f64>],
    null_idx: &[usize],
    mu: &[f64],
    sided: Sidedness,
) -> Result<GaussianFactors> {
    let n = sigma.len();
    if n == 0 {
        return Err(FdrError::Empty("covariance matrix"));
    }
    if sigma.iter().any(|row| row.len() != n) {
        return Err(FdrError::InvalidMatrix("covariance rows have unequal length".into()));
    }
    if mu.len() != n {
        return Err(FdrError::InvalidGenerator(format!(
            "mean vector has length {} but covariance is {n}x{n}",
            mu.len()
        )));
    }
    let full = DMatrix::from_fn(n, n, |i, j| sigma[i][j]);
    validate_correlation(&full)?;
    let mut is_null = vec![false; n];
    for &i in null_idx {
        if i >= n {
            return Err(FdrError::IndexOutOfRange { index: i, len: n });
        }
        if is_null[i] {
            return Err(FdrError::DuplicateIndex(i));
        }
        is_null[i] = true;
    }
    if let Some(i) = (0..n).find(|&i| is_null[i] && mu[i] != 0.0) {
        return Err(FdrError::InvalidGenerator(format!(
            "mean of null coordinate {i} is {} instead of 0",
            mu[i]
        )));
    }
    let nulls: Vec<usize> = (0..n).filter(|&i| is_null[i]).collect();
    let alts: Vec<usize> = (0..n).filter(|&i| !is_null[i]).collect();
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| full[(r[i], c[j])]);
    let s00 = sub(&nulls, &nulls);
    let s10 = sub(&alts, &nulls);
    let s11 = sub(&alts, &alts);

    // Symmetric root of s00 and its pseudo-inverse share eigenvectors.
    let eig = s00.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(1.0);
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let pinv = eig.eigenvalues.map(|l| if l > tol { 1.0 / l.sqrt() } else { 0.0 });
    let v = &eig.eigenvectors;
    let l0 = v * DMatrix::from_diagonal(&root) * v.transpose();
    let l0_pinv = v * DMatrix::from_diagonal(&pinv) * v.transpose();
    let m = &s10 * l0_pinv;
    let cond = &s11 - &m * m.transpose();
    let cond = (&cond + cond.transpose()) * 0.5;
    let l1 = if alts.is_empty() { cond } else { psd_sqrt(&cond) };
    Ok(GaussianFactors {
        alt_mu: alts.iter().map(|&i| mu[i]).collect(),
        null_idx: nulls,
        alt_idx: alts,
        l0,
        m,
        l1,
        sided,
    })
}

impl Prepared {
    fn new(spec: &GeneratorSpec) -> Result<Self> {
        let check_mu = |mu_alt: f64| {
            if mu_alt.is_finite() {
                Ok(())
            } else {
                Err(FdrError::InvalidGenerator(format!("non-finite mean shift {mu_alt}")))
            }
        };
        match spec {
            &GeneratorSpec::IidUniform { n0, n1, mu_alt } => {
                check_mu(mu_alt)?;
                if n0 + n1 == 0 {
                    return Err(FdrError::Empty("generator with no hypotheses"));
                }
                Ok(Prepared::Iid { n0, n1, mu_alt })
            }
            &GeneratorSpec::EquicorrelatedNormal {
                n,
                n0,
                rho,
                sided,
                mu_alt,
            } => {
                check_mu(mu_alt)?;
                if n == 0 {
                    return Err(FdrError::Empty("generator with no hypotheses"));
                }
                if n0 > n {
                    return Err(FdrError::InconsistentCounts(format!("n0 = {n0} > n = {n}")));
                }
                let (a, b) = if n0 == 0 {
                    check_rho(rho, 1)?;
                    (1.0, 0.0)
                } else {
                    equicorrelated_root(n0, rho)?
                };
                Ok(Prepared::Equi {
                    n0,
                    n1: n - n0,
                    a,
                    b,
                    sided,
                    mu_alt,
                })
            }
            GeneratorSpec::PrdnGaussian {
                sigma,
                null_idx,
                mu,
                sided,
            } => Ok(Prepared::Gaussian(Box::new(gaussian_factors(
                sigma, null_idx, mu, *sided,
            )?))),
            GeneratorSpec::BlockDependent {
                block_sizes,
                max_block,
                within,
                n0,
                mu_alt,
            } => {
                check_mu(*mu_alt)?;
                let n: usize = block_sizes.iter().sum();
                if n == 0 {
                    return Err(FdrError::Empty("generator with no hypotheses"));
                }
                if let Some(&b) = block_sizes.iter().find(|&&b| b == 0 || b > *max_block) {
                    return Err(FdrError::InvalidGenerator(format!(
                        "block size {b} outside [1, {max_block}]"
                    )));
                }
                if *n0 > n {
                    return Err(FdrError::InconsistentCounts(format!("n0 = {n0} > n = {n}")));
                }
                let (identical, roots) = match *within {
                    WithinBlock::Identical => (true, Vec::new()),
                    WithinBlock::Equicorrelated { rho } => (
                        false,
                        block_sizes
                            .iter()
                            .map(|&b| equicorrelated_root(b, rho))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                };
                Ok(Prepared::Block {
                    sizes: block_sizes.clone(),
                    roots,
                    identical,
                    n0: *n0,
                    mu_alt: *mu_alt,
                })
            }
            GeneratorSpec::TwoSidedWrap { inner } => {
                Ok(Prepared::TwoSided(Box::new(Prepared::new(inner)?)))
            }
        }
    }

    /// Appends the null p-values to `nulls`. When `rest` is given, finishes
    /// the draw and writes all p-values in index order.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, nulls: &mut Vec<f64>, rest: Option<&mut Vec<f64>>) {
        match self {
            &Prepared::Iid { n0, n1, mu_alt } => {
                nulls.extend((0..n0).map(|_| rng.sample::<f64, _>(Open01)));
                if let Some(out) = rest {
                    out.clear();
                    out.extend_from_slice(nulls);
                    out.extend((0..n1).map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        normal_sf(z + mu_alt)
                    }));
                }
            }
            &Prepared::Equi {
                n0,
                n1,
                a,
                b,
                sided,
                mu_alt,
            } => {
                let mut eps: Vec<f64> = (0..n0).map(|_| rng.sample(StandardNormal)).collect();
                apply_root(a, b, &mut eps);
                nulls.extend(eps.iter().map(|&z| pvalue_of(z, sided)));
                if let Some(out) = rest {
                    out.clear();
                    out.extend_from_slice(nulls);
                    out.extend((0..n1).map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        pvalue_of(z + mu_alt, sided)
                    }));
                }
            }
            Prepared::Gaussian(g) => {
                let k0 = g.null_idx.len();
                let e0 = DVector::from_iterator(k0, (0..k0).map(|_| rng.sample(StandardNormal)));
                let x0 = &g.l0 * &e0;
                nulls.extend(x0.iter().map(|&z| pvalue_of(z, g.sided)));
                if let Some(out) = rest {
                    let k1 = g.alt_idx.len();
                    let e1 = DVector::from_iterator(k1, (0..k1).map(|_| rng.sample(StandardNormal)));
                    let x1 = &g.m * &e0 + &g.l1 * e1;
                    out.clear();
                    out.resize(k0 + k1, 0.0);
                    for (&i, &z) in g.null_idx.iter().zip(x0.iter()) {
                        out[i] = pvalue_of(z, g.sided);
                    }
                    for ((&i, &z), &mu) in g.alt_idx.iter().zip(x1.iter()).zip(&g.alt_mu) {
                        out[i] = pvalue_of(z + mu, g.sided);
                    }
                }
            }
            Prepared::Block {
                sizes,
                roots,
                identical,
                n0,
                mu_alt,
            } => {
                // Blocks holding any null are drawn whole during the null
                // phase; only the null members are reported.
                let mut z = Vec::with_capacity(sizes.iter().sum());
                let mut start = 0;
                let mut block_no = 0;
                let draw_block = |rng: &mut R, k: usize, z: &mut Vec<f64>| {
                    let b = sizes[k];
                    if *identical {
                        let shared: f64 = rng.sample(StandardNormal);
                        z.extend(std::iter::repeat_n(shared, b));
                    } else {
                        let (a, c) = roots[k];
                        let mut eps: Vec<f64> = (0..b).map(|_| rng.sample(StandardNormal)).collect();
                        apply_root(a, c, &mut eps);
                        z.extend(eps);
                    }
                };
                while start < *n0 {
                    draw_block(rng, block_no, &mut z);
                    start += sizes[block_no];
                    block_no += 1;
                }
                nulls.extend(z[..*n0].iter().map(|&v| normal_sf(v)));
                if let Some(out) = rest {
                    while block_no < sizes.len() {
                        draw_block(rng, block_no, &mut z);
                        block_no += 1;
                    }
                    out.clear();
                    out.extend_from_slice(nulls);
                    out.extend(z[*n0..].iter().map(|&v| normal_sf(v + mu_alt)));
                }
            }
            Prepared::TwoSided(inner) => {
                let from = nulls.len();
                match rest {
                    Some(out) => {
                        inner.draw(rng, nulls, Some(out));
                        out.iter_mut().for_each(|p| *p = two_sided(*p));
                    }
                    None => inner.draw(rng, nulls, None),
                }
                nulls[from..].iter_mut().for_each(|p| *p = two_sided(*p));
            }
        }
    }

    fn null_mask(&self) -> Vec<bool> {
        match self {
            &Prepared::Iid { n0, n1, .. } | &Prepared::Equi { n0, n1, .. } => {
                let mut mask = vec![true; n0];
                mask.resize(n0 + n1, false);
                mask
            }
            Prepared::Gaussian(g) => {
                let mut mask = vec![false; g.null_idx.len() + g.alt_idx.len()];
                for &i in &g.null_idx {
                    mask[i] = true;
                }
                mask
            }
            Prepared::Block { sizes, n0, .. } => {
                let mut mask = vec![true; *n0];
                mask.resize(sizes.iter().sum(), false);
                mask
            }
            Prepared::TwoSided(inner) => inner.null_mask(),
        }
    }
}

impl Generator {
    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn n0(&self) -> usize {
        self.spec.n0()
    }

    pub fn n1(&self) -> usize {
        self.spec.n1()
    }

    pub fn null_mask(&self) -> Vec<bool> {
        self.kind.null_mask()
    }

    /// Null p-values only, in increasing index order.
    pub fn draw_nulls<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut nulls = Vec::with_capacity(self.n0());
        self.kind.draw(rng, &mut nulls, None);
        nulls
    }

    /// A full study; its nulls equal `draw_nulls` on the same RNG state.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PValueStudy {
        let mut nulls = Vec::with_capacity(self.n0());
        let mut all = Vec::with_capacity(self.n());
        self.kind.draw(rng, &mut nulls, Some(&mut all));
        PValueStudy::new(all, self.null_mask()).expect("generated p-values lie in [0, 1]")
    }

    pub fn sample(&self, seed: u64) -> PValueStudy {
        self.draw(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sample_nulls(&self, seed: u64) -> Vec<f64> {
        self.draw_nulls(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sided_examples() {
        assert_eq!(two_sided_from_one_sided(0.3).unwrap(), 0.6);
        assert!((two_sided_from_one_sided(0.8).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(two_sided_from_one_sided(0.5).unwrap(), 1.0);
        assert!(two_sided_from_one_sided(1.5).is_err());
        assert!(two_sided_from_one_sided(-0.1).is_err());
    }

    #[test]
    fn block_adjusted_examples() {
        let s = PValueStudy::global_null(vec![0.2, 0.5, 0.9]).unwrap();
        assert_eq!(block_adjusted_pvalues(&s, &[1, 1, 1]).unwrap(), vec![0.2, 0.5, 0.9]);
        let s = PValueStudy::global_null(vec![0.5, 0.02, 0.3, 0.7, 0.8]).unwrap();
        assert_eq!(block_adjusted_pvalues(&s, &[3, 2]).unwrap(), vec![0.06, 1.0]);
        assert!(block_adjusted_pvalues(&s, &[3, 3]).is_err());
    }

    #[test]
    fn vanishing_family_examples() {
        let d = VanishingSchedule::default();
        assert_eq!(vanishing_null_family(2, d), (2, 2));
        assert_eq!(vanishing_null_family(1, d), (1, 1));
        assert_eq!(vanishing_null_family(10, d), (24, 10));
        for l in 1..=10_000 {
            let (n, n0) = vanishing_null_family(l, d);
            assert!(n >= n0);
            assert!(n0 as f64 * (n0 as f64).ln() / n as f64 <= 1.0);
        }
    }

    #[test]
    fn iid_single_null() {
        let spec = GeneratorSpec::IidUniform {
            n0: 1,
            n1: 0,
            mu_alt: 2.0,
        };
        let s = sample(&spec, 7).unwrap();
        assert_eq!(s.null_mask(), &[true]);
        assert!(s.pvalues()[0] > 0.0 && s.pvalues()[0] < 1.0);
        assert_eq!(sample(&spec, 7).unwrap(), s);
    }

    #[test]
    fn rho_range_enforced() {
        let spec = |rho| GeneratorSpec::EquicorrelatedNormal {
            n: 5,
            n0: 4,
            rho,
            sided: Sidedness::One,
            mu_alt: 2.0,
        };
        assert!(spec(-1.0 / 3.0).validate().is_ok());
        assert!(matches!(
            spec(-0.34).validate(),
            Err(FdrError::CorrelationOutOfRange { .. })
        ));
        assert!(spec(1.0).validate().is_err());
        assert!(spec(0.99).validate().is_ok());
    }

    #[test]
    fn root_squares_to_equicorrelation() {
        for &(m, rho) in &[(1usize, 0.0), (2, -1.0), (5, -0.25), (50, 0.3), (1000, -1.0 / 999.0)] {
            let a = equicorrelated_root_matrix(m, rho).unwrap();
            let prod = &a * a.transpose();
            for i in 0..m {
                for j in 0..m {
                    let want = if i == j { 1.0 } else { rho };
                    assert!((prod[(i, j)] - want).abs() <= 1e-12, "m={m} rho={rho}");
                }
            }
        }
    }

    #[test]
    fn nulls_agree_between_draws() {
        let specs = vec![
            GeneratorSpec::IidUniform { n0: 4, n1: 3, mu_alt: 2.0 },
            GeneratorSpec::EquicorrelatedNormal {
                n: 7,
                n0: 4,
                rho: -0.2,
                sided: Sidedness::Two,
                mu_alt: 2.0,
            },
            GeneratorSpec::PrdnGaussian {
                sigma: vec![
                    vec![1.0, 0.3, -0.2],
                    vec![0.3, 1.0, 0.1],
                    vec![-0.2, 0.1, 1.0],
                ],
                null_idx: vec![2, 0],
                mu: vec![0.0, 1.5, 0.0],
                sided: Sidedness::One,
            },
            GeneratorSpec::BlockDependent {
                block_sizes: vec![3, 3, 1],
                max_block: 3,
                within: WithinBlock::Identical,
                n0: 4,
                mu_alt: 2.0,
            },
            GeneratorSpec::TwoSidedWrap {
                inner: Box::new(GeneratorSpec::BlockDependent {
                    block_sizes: vec![2, 2, 2],
                    max_block: 2,
                    within: WithinBlock::Equicorrelated { rho: -0.5 },
                    n0: 3,
                    mu_alt: 2.0,
                }),
            },
        ];
        for spec in specs {
            let g = spec.prepare().unwrap();
            for seed in 0..20 {
                let study = g.sample(seed);
                assert_eq!(study.null_pvalues(), g.sample_nulls(seed), "{spec:?}");
                assert_eq!(study.n(), spec.n());
                assert_eq!(study.n0(), spec.n0());
            }
        }
    }

    #[test]
    fn identical_blocks_share_values() {
        let spec = GeneratorSpec::BlockDependent {
            block_sizes: vec![3, 3],
            max_block: 3,
            within: WithinBlock::Identical,
            n0: 6,
            mu_alt: 2.0,
        };
        let s = sample(&spec, 3).unwrap();
        let p = s.pvalues();
        assert!(p[0] == p[1] && p[1] == p[2]);
        assert!(p[3] == p[4] && p[4] == p[5]);
        assert_ne!(p[0], p[3]);
    }

    #[test]
    fn bad_specs_rejected() {
        let too_big = GeneratorSpec::BlockDependent {
            block_sizes: vec![4],
            max_block: 3,
            within: WithinBlock::Identical,
            n0: 4,
            mu_alt: 2.0,
        };
        assert!(too_big.validate().is_err());
        let not_psd = GeneratorSpec::PrdnGaussian {
            sigma: vec![vec![1.0, 1.5], vec![1.5, 1.0]],
            null_idx: vec![0, 1],
            mu: vec![0.0, 0.0],
            sided: Sidedness::One,
        };
        assert!(matches!(not_psd.validate(), Err(FdrError::NotPositiveSemidefinite(_))));
        let shifted_null = GeneratorSpec::PrdnGaussian {
            sigma: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            null_idx: vec![0],
            mu: vec![1.0, 0.0],
            sided: Sidedness::One,
        };
        assert!(shifted_null.validate().is_err());
    }

    #[test]
    fn nulls_only_keeps_null_law() {
        let spec = GeneratorSpec::PrdnGaussian {
            sigma: vec![
                vec![1.0, 0.3, 0.2],
                vec![0.3, 1.0, 0.1],
                vec![0.2, 0.1, 1.0],
            ],
            null_idx: vec![0, 2],
            mu: vec![0.0, 1.0, 0.0],
            sided: Sidedness::One,
        };
        let GeneratorSpec::PrdnGaussian { sigma, .. } = spec.nulls_only().unwrap() else {
            panic!("variant changed");
        };
        assert_eq!(sigma, vec![vec![1.0, 0.2], vec![0.2, 1.0]]);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = GeneratorSpec::TwoSidedWrap {
            inner: Box::new(GeneratorSpec::EquicorrelatedNormal {
                n: 10,
                n0: 10,
                rho: 0.5,
                sided: Sidedness::One,
                mu_alt: 2.0,
            }),
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<GeneratorSpec>(&text).unwrap(), spec);
        let bad = r#"{"kind":"iid_uniform","n0":3,"n1":0,"extra":1}"#;
        assert!(serde_json::from_str::<GeneratorSpec>(bad).is_err());
        let defaulted: GeneratorSpec = serde_json::from_str(r#"{"kind":"iid_uniform","n0":3,"n1":1}"#).unwrap();
        assert_eq!(defaulted.n(), 4);
    }
}
