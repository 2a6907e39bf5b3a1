//! Seeded Monte Carlo estimation of FDR, FDX, FDP moments, the null Simes
//! curve and the constant `D_alpha`.
//!
//! Replication `r` of a run with master seed `s` uses its own `ChaCha8Rng`
//! seeded with [`replication_seed`]`(s, r)`. Per-replication values are
//! collected in replication order and reduced with a fixed-shape pairwise
//! sum, so results are bit-identical for any number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::adversaries::AdversarySpec;
use crate::bounds::{fdr_link_bound, EmpiricalCdf, Fdr0Curve};
use crate::dependence::{Generator, GeneratorSpec};
use crate::error::{check_alpha, FdrError, Result};
use crate::numeric::{pairwise_sum, threshold_rank};
use crate::ratio::Ratio;
use crate::testing::{
    bh_step_down, bh_step_up, fdp_upper_bound_ratio, max_fdp_compliant, simes_of_sorted, sorted,
    PValueStudy, RejectionOutcome,
};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer applied to `x + 0x9E3779B97F4A7C15`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep`: output number `rep` (0-based) of the SplitMix64
/// stream started at `master_seed`.
pub fn replication_seed(master_seed: u64, rep: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(rep.wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub reps: usize,
    pub master_seed: u64,
    /// Thread count hint. Never affects results.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(reps: usize, master_seed: u64) -> Self {
        Self {
            reps,
            master_seed,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(FdrError::InvalidArgument("reps must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(FdrError::InvalidArgument("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Evaluates `f` on every replication seed, in replication order.
    pub fn map_reps<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        self.validate()?;
        let seed = self.master_seed;
        let run = || {
            (0..self.reps as u64)
                .into_par_iter()
                .map(|r| f(replication_seed(seed, r)))
                .collect::<Result<Vec<T>>>()
        };
        match self.workers {
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| FdrError::InvalidArgument(format!("thread pool: {e}")))?
                .install(run),
            None => run(),
        }
    }

    /// Runs `f` on every replication and summarizes the values.
    pub fn estimate<F>(&self, f: F) -> Result<McEstimate>
    where
        F: Fn(u64) -> Result<f64> + Sync + Send,
    {
        let values = self.map_reps(f)?;
        Ok(McEstimate::from_values(&values, self.master_seed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(reps)`; 0 when `reps == 1`.
    pub stderr: f64,
    pub reps: usize,
    pub seed: u64,
    /// False when `reps == 1` and the sample variance is undefined.
    pub stderr_defined: bool,
}

impl McEstimate {
    pub fn from_values(values: &[f64], seed: u64) -> Self {
        let reps = values.len();
        assert!(reps > 0, "estimate of zero replications");
        let mean = pairwise_sum(values) / reps as f64;
        if reps == 1 {
            return Self {
                mean,
                stderr: 0.0,
                reps,
                seed,
                stderr_defined: false,
            };
        }
        let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&squares) / (reps - 1) as f64;
        Self {
            mean,
            stderr: (var / reps as f64).sqrt(),
            reps,
            seed,
            stderr_defined: true,
        }
    }

    /// `mean + k * stderr`.
    pub fn upper(&self, k: f64) -> f64 {
        self.mean + k * self.stderr
    }

    /// `mean - k * stderr`.
    pub fn lower(&self, k: f64) -> f64 {
        self.mean - k * self.stderr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    StepUp,
    StepDown,
    /// The compliant rejection set with the largest FDP on the realized study.
    MostAntiConservative,
}

impl Procedure {
    pub fn run(self, study: &PValueStudy, alpha: f64) -> Result<RejectionOutcome> {
        match self {
            Procedure::StepUp => bh_step_up(study, alpha),
            Procedure::StepDown => bh_step_down(study, alpha),
            Procedure::MostAntiConservative => max_fdp_compliant(study, alpha),
        }
    }
}

/// FDP of `proc` on the study made of `nulls`, `zeros` non-nulls equal to 0
/// and `n1 - zeros` non-nulls equal to 1.
///
/// Same result as building the study and running [`Procedure::run`], in
/// O(n0 + zeros): a 1 never clears `alpha R / n` and a 0 always does.
pub fn fdp_with_extreme_non_nulls(
    nulls: &[f64],
    zeros: usize,
    n1: usize,
    alpha: f64,
    proc: Procedure,
) -> Result<Ratio> {
    check_alpha(alpha)?;
    if zeros > n1 {
        return Err(FdrError::InconsistentCounts(format!("{zeros} zeros among {n1} non-nulls")));
    }
    let n = (nulls.len() + n1) as u64;
    let m = nulls.len() + zeros;
    if m == 0 {
        return Ok(Ratio::ZERO);
    }
    let mut null_counts = vec![0usize; m + 1];
    for &p in nulls {
        let r = threshold_rank(p, n, alpha);
        if r <= m as u64 {
            null_counts[r as usize] += 1;
        }
    }
    let mut v = 0usize;
    let fdp_at = |v: usize, total: usize| {
        if total == 0 {
            Ratio::ZERO
        } else {
            Ratio::new(v as u64, total as u64)
        }
    };
    match proc {
        Procedure::StepUp | Procedure::StepDown => {
            let mut picked = (0usize, 0usize);
            for (j, &c) in (1..=m).zip(&null_counts[1..=m]) {
                v += c;
                let total = v + zeros;
                if total >= j {
                    picked = (v, total);
                } else if proc == Procedure::StepDown {
                    break;
                }
            }
            Ok(fdp_at(picked.0, picked.1))
        }
        Procedure::MostAntiConservative => {
            let mut best: Option<Ratio> = None;
            for (j, &c) in (1..=m).zip(&null_counts[1..=m]) {
                v += c;
                if v + zeros < j {
                    continue;
                }
                let f = Ratio::new(v.min(j) as u64, j as u64);
                if best.is_none_or(|b| f.cmp(&b) != Ordering::Less) {
                    best = Some(f);
                }
            }
            Ok(best.unwrap_or(Ratio::ZERO))
        }
    }
}

/// One replication of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replication {
    pub fdp: Ratio,
    /// `fdp_upper_bound` of the realized nulls; every compliant procedure
    /// stays below it.
    pub bound: Ratio,
    /// Zeros placed by the adversary, if one ran.
    pub zeros: Option<usize>,
}

/// Draws nulls, completes the study with `adv` (or keeps the generated
/// non-nulls) and runs `proc`.
pub fn replicate(
    gen: &Generator,
    adv: Option<AdversarySpec>,
    proc: Procedure,
    alpha: f64,
    seed: u64,
) -> Result<Replication> {
    check_alpha(alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = gen.n();
    match adv {
        Some(adv) => {
            let nulls = gen.draw_nulls(&mut rng);
            let (_, zeros) = adv.zeros_for(&nulls, gen.n1(), alpha)?;
            Ok(Replication {
                fdp: fdp_with_extreme_non_nulls(&nulls, zeros, gen.n1(), alpha, proc)?,
                bound: fdp_upper_bound_ratio(&nulls, n, alpha)?,
                zeros: Some(zeros),
            })
        }
        None => {
            let study = gen.draw(&mut rng);
            Ok(Replication {
                fdp: proc.run(&study, alpha)?.fdp(),
                bound: fdp_upper_bound_ratio(&study.null_pvalues(), n, alpha)?,
                zeros: None,
            })
        }
    }
}

fn prepare_pipeline(gen: &GeneratorSpec, adv: Option<AdversarySpec>, alpha: f64) -> Result<Generator> {
    check_alpha(alpha)?;
    let g = gen.prepare()?;
    if let Some(adv) = adv {
        if g.n0() == 0 {
            return Err(FdrError::Incompatible("adversary needs at least one null".into()));
        }
        // Shape errors surface here rather than inside the parallel loop.
        adv.zeros_for(&vec![0.5; g.n0()], g.n1(), alpha)?;
    }
    Ok(g)
}

/// All per-replication records, in replication order.
pub fn replications(
    gen: &GeneratorSpec,
    adv: Option<AdversarySpec>,
    proc: Procedure,
    alpha: f64,
    cfg: &McConfig,
) -> Result<Vec<Replication>> {
    let g = prepare_pipeline(gen, adv, alpha)?;
    cfg.map_reps(|seed| replicate(&g, adv, proc, alpha, seed))
}

/// `E[FDP^k]`.
pub fn estimate_fdp_moment(
    gen: &GeneratorSpec,
    adv: Option<AdversarySpec>,
    proc: Procedure,
    alpha: f64,
    k: u32,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if k == 0 {
        return Err(FdrError::InvalidArgument("moment order must be at least 1".into()));
    }
    let g = prepare_pipeline(gen, adv, alpha)?;
    cfg.estimate(|seed| Ok(replicate(&g, adv, proc, alpha, seed)?.fdp.to_f64().powi(k as i32)))
}

/// `E[FDP]`.
pub fn estimate_fdr(
    gen: &GeneratorSpec,
    adv: Option<AdversarySpec>,
    proc: Procedure,
    alpha: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    estimate_fdp_moment(gen, adv, proc, alpha, 1, cfg)
}

/// `P(FDP >= gamma)`.
pub fn estimate_fdx(
    gen: &GeneratorSpec,
    adv: Option<AdversarySpec>,
    proc: Procedure,
    alpha: f64,
    gamma: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(FdrError::InvalidGamma(gamma));
    }
    let g = prepare_pipeline(gen, adv, alpha)?;
    cfg.estimate(|seed| {
        let fdp = replicate(&g, adv, proc, alpha, seed)?.fdp.to_f64();
        Ok(if fdp >= gamma { 1.0 } else { 0.0 })
    })
}

/// Simes p-values of the nulls of `gen`, one per replication.
pub fn simes_samples(gen: &GeneratorSpec, cfg: &McConfig) -> Result<Vec<f64>> {
    let g = gen.prepare()?;
    if g.n0() == 0 {
        return Err(FdrError::Empty("Simes curve of a generator without nulls"));
    }
    cfg.map_reps(|seed| {
        let nulls = g.draw_nulls(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(simes_of_sorted(&sorted(&nulls)))
    })
}

/// Empirical CDF of the null Simes p-value, i.e. the estimated `FDR0(x)`
/// for every `x` at once. Non-nulls of `gen` are ignored.
pub fn estimate_fdr0_curve(gen: &GeneratorSpec, cfg: &McConfig) -> Result<Fdr0Curve> {
    Ok(Fdr0Curve::Empirical(EmpiricalCdf::from_samples(simes_samples(gen, cfg)?)?))
}

/// Truncation controls for [`estimate_d_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DAlphaTruncation {
    /// Minimum walk length before the early stop may fire; `None` means
    /// `ceil(20 / alpha)`.
    pub j0: Option<u64>,
    pub j_max: u64,
}

impl Default for DAlphaTruncation {
    fn default() -> Self {
        Self {
            j0: None,
            j_max: 10_000_000,
        }
    }
}

/// `min{ max_{j <= J} j / ceil(S_j / alpha), 1 }` for one exponential walk.
///
/// Stops once the running max reaches 1, or once `j >= j0` and
/// `alpha j / S_j` (an upper bound on every later term only in the limit)
/// falls below the running max, or at `j_max`.
pub fn d_alpha_path<R: Rng + ?Sized>(rng: &mut R, alpha: f64, trunc: DAlphaTruncation) -> f64 {
    let j0 = trunc.j0.unwrap_or_else(|| (20.0 / alpha).ceil() as u64);
    let mut s = 0.0f64;
    let mut best = 0.0f64;
    for j in 1..=trunc.j_max.max(1) {
        s += rng.sample::<f64, _>(Exp1);
        let c = (s / alpha).ceil().max(1.0);
        let jf = j as f64;
        best = best.max(jf / c);
        if best >= 1.0 {
            return 1.0;
        }
        if j >= j0 && alpha * jf / s < best {
            break;
        }
    }
    best
}

pub fn estimate_d_alpha(alpha: f64, cfg: &McConfig) -> Result<McEstimate> {
    estimate_d_alpha_with(alpha, cfg, DAlphaTruncation::default())
}

pub fn estimate_d_alpha_with(alpha: f64, cfg: &McConfig, trunc: DAlphaTruncation) -> Result<McEstimate> {
    check_alpha(alpha)?;
    cfg.estimate(|seed| Ok(d_alpha_path(&mut ChaCha8Rng::seed_from_u64(seed), alpha, trunc)))
}

/// Monte Carlo side of the linking inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkingCheck {
    /// Estimated FDR of step-up BH.
    pub lhs: McEstimate,
    /// Linking bound evaluated on the estimated null Simes curve.
    pub rhs: f64,
    /// `rhs - lhs.mean`.
    pub slack: f64,
}

/// Compares BH's estimated FDR with the linking bound built from the
/// estimated null curve. Both use the same replication seeds, so the nulls
/// behind `lhs` and the curve coincide draw for draw.
pub fn verify_linking(
    gen: &GeneratorSpec,
    adv: Option<AdversarySpec>,
    alpha: f64,
    cfg: &McConfig,
) -> Result<LinkingCheck> {
    let lhs = estimate_fdr(gen, adv, Procedure::StepUp, alpha, cfg)?;
    let curve = estimate_fdr0_curve(gen, cfg)?;
    let rhs = fdr_link_bound(gen.pi0(), alpha, &curve)?;
    Ok(LinkingCheck {
        lhs,
        rhs,
        slack: rhs - lhs.mean,
    })
}

fn null_statistic<F>(gen: &GeneratorSpec, cfg: &McConfig, min_nulls: usize, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let g = gen.prepare()?;
    if g.n0() < min_nulls {
        return Err(FdrError::InvalidArgument(format!(
            "statistic needs at least {min_nulls} nulls, generator has {}",
            g.n0()
        )));
    }
    cfg.estimate(|seed| {
        let nulls = sorted(&g.draw_nulls(&mut ChaCha8Rng::seed_from_u64(seed)));
        Ok(f(&nulls))
    })
}

/// `E[alpha / (n p_(2))]` over the nulls of `gen`.
///
/// For independent uniform nulls `p_(2) ~ Beta(2, n0 - 1)` and the
/// expectation is `pi0 alpha`, but the summand has infinite variance.
pub fn estimate_inverse_second(gen: &GeneratorSpec, alpha: f64, cfg: &McConfig) -> Result<McEstimate> {
    check_alpha(alpha)?;
    let n = gen.n() as f64;
    null_statistic(gen, cfg, 2, |s| alpha / (n * s[1]))
}

/// `E[max_{j >= 2} alpha j / (n p_(j))]` over the nulls of `gen`.
pub fn estimate_masked_max(gen: &GeneratorSpec, alpha: f64, cfg: &McConfig) -> Result<McEstimate> {
    check_alpha(alpha)?;
    let n = gen.n() as f64;
    null_statistic(gen, cfg, 2, |s| {
        s.iter()
            .enumerate()
            .skip(1)
            .map(|(k, &p)| alpha * (k + 1) as f64 / (n * p))
            .fold(0.0, f64::max)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::MaskStrategy;

    fn iid(n0: usize, n1: usize) -> GeneratorSpec {
        GeneratorSpec::IidUniform { n0, n1, mu_alt: 2.0 }
    }

    #[test]
    fn splitmix_reference() {
        // First outputs of SplitMix64 seeded with 0.
        assert_eq!(replication_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(replication_seed(0, 1), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(replication_seed(0, 2), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn single_rep_has_undefined_stderr() {
        let e = estimate_fdr(&iid(5, 0), None, Procedure::StepUp, 0.2, &McConfig::new(1, 3)).unwrap();
        assert_eq!(e.stderr, 0.0);
        assert!(!e.stderr_defined);
        assert!(e.mean == 0.0 || e.mean == 1.0);
    }

    #[test]
    fn zero_reps_rejected() {
        assert!(estimate_d_alpha(0.1, &McConfig::new(0, 1)).is_err());
        assert!(estimate_d_alpha(1.0, &McConfig::new(5, 1)).is_err());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = iid(20, 30);
        let adv = Some(AdversarySpec::Informed);
        let base = McConfig::new(500, 42);
        let a = estimate_fdr(&spec, adv, Procedure::StepUp, 0.1, &base.with_workers(1)).unwrap();
        let b = estimate_fdr(&spec, adv, Procedure::StepUp, 0.1, &base.with_workers(3)).unwrap();
        let c = estimate_fdr(&spec, adv, Procedure::StepUp, 0.1, &base).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_eq!(a, c);
    }

    #[test]
    fn fast_path_matches_full_study() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let n0 = rng.random_range(1..8);
            let n1 = rng.random_range(0..8);
            let zeros = rng.random_range(0..=n1);
            let alpha = [0.05, 0.1, 0.3, 0.7][rng.random_range(0..4)];
            let nulls: Vec<f64> = (0..n0)
                .map(|_| (rng.random_range(0..=40) as f64) / 40.0 * 0.5)
                .collect();
            let mut p = nulls.clone();
            p.extend(std::iter::repeat_n(0.0, zeros));
            p.extend(std::iter::repeat_n(1.0, n1 - zeros));
            let study = PValueStudy::with_leading_nulls(p, n0).unwrap();
            for proc in [Procedure::StepUp, Procedure::StepDown, Procedure::MostAntiConservative] {
                let full = proc.run(&study, alpha).unwrap().fdp();
                let fast = fdp_with_extreme_non_nulls(&nulls, zeros, n1, alpha, proc).unwrap();
                assert_eq!(full, fast, "{proc:?} {nulls:?} zeros={zeros} n1={n1} alpha={alpha}");
            }
        }
    }

    #[test]
    fn incompatible_adversary_is_reported() {
        let cfg = McConfig::new(10, 1);
        let r = estimate_fdr(&iid(1, 5), Some(AdversarySpec::BonferroniMasked(MaskStrategy::PlugInSecond)), Procedure::StepUp, 0.1, &cfg);
        assert!(matches!(r, Err(FdrError::Incompatible(_))));
        let r = estimate_fdr(&iid(3, 2), Some(AdversarySpec::FixedZeros(3)), Procedure::StepUp, 0.1, &cfg);
        assert!(matches!(r, Err(FdrError::Incompatible(_))));
    }

    #[test]
    fn moment_and_fdx_preconditions() {
        let cfg = McConfig::new(10, 1);
        assert!(estimate_fdp_moment(&iid(3, 0), None, Procedure::StepUp, 0.1, 0, &cfg).is_err());
        assert!(matches!(
            estimate_fdx(&iid(3, 0), None, Procedure::StepUp, 0.1, 1.5, &cfg),
            Err(FdrError::InvalidGamma(_))
        ));
        assert!(estimate_fdr0_curve(&iid(0, 3), &cfg).is_err());
    }

    #[test]
    fn d_alpha_path_is_capped() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let v = d_alpha_path(&mut rng, 0.3, DAlphaTruncation::default());
            assert!(v > 0.0 && v <= 1.0);
        }
    }
}
