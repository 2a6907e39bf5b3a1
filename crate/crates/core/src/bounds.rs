//! Closed-form FDR bounds and the FDR-linking evaluator.
//!
//! The linking functional is `t + t * integral_t^1 F(x) / x^2 dx` with
//! `t = pi0 * alpha`, where `F` is the CDF of the Simes p-value computed on the
//! nulls (equivalently, the FDR of BH restricted to the nulls).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, check_pi0, FdrError, Result};
use crate::numeric::{compensated_sum, pairwise_sum};

/// The null-only FDR curve `F(x) = FDR_0(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fdr0Curve {
    /// `F(x) = min(c x, 1)`.
    Linear(f64),
    /// `F(x) = 1`.
    WorstCase,
    /// Empirical CDF of Simes p-value samples.
    Empirical(EmpiricalCdf),
}

/// Right-continuous empirical CDF `F(x) = #{s_i <= x} / m` over sorted knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    knots: Vec<f64>,
}

impl EmpiricalCdf {
    /// Sorts `samples`; every sample must lie in `[0, 1]`.
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(FdrError::InvalidCurve("empirical curve without samples".into()));
        }
        if samples.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(FdrError::InvalidCurve("knot outside [0, 1]".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { knots: samples })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let count = self.knots.partition_point(|&s| s <= x);
        count as f64 / self.knots.len() as f64
    }

    /// Largest distance to the uniform CDF `F(x) = x` on `[0, 1]`.
    pub fn ks_distance_from_uniform(&self) -> f64 {
        let m = self.knots.len() as f64;
        self.knots
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let above = (i + 1) as f64 / m - s;
                let below = s - i as f64 / m;
                above.max(below)
            })
            .fold(0.0, f64::max)
    }
}

impl Fdr0Curve {
    pub fn validate(&self) -> Result<()> {
        match self {
            Fdr0Curve::Linear(c) if !(c.is_finite() && *c >= 0.0) => Err(FdrError::InvalidCurve(
                format!("linear slope must be finite and non-negative, got {c}"),
            )),
            Fdr0Curve::Empirical(e) if e.is_empty() => {
                Err(FdrError::InvalidCurve("empirical curve without samples".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Fdr0Curve::Linear(c) => (c * x).min(1.0),
            Fdr0Curve::WorstCase => 1.0,
            Fdr0Curve::Empirical(e) => e.eval(x),
        }
    }

    /// `t + t * integral_t^1 F(x) / x^2 dx` for `0 < t < 1`, unclamped.
    ///
    /// Linear curves split at the kink `1 / c`. For an empirical curve with
    /// knots `s_i`, summing `F`-levels times `1/a - 1/b` over its constancy
    /// intervals and regrouping per knot gives the mean of `min(t / s_i, 1)`.
    pub fn linking_functional(&self, t: f64) -> f64 {
        match self {
            Fdr0Curve::WorstCase => 1.0,
            Fdr0Curve::Linear(c) => {
                let c = *c;
                if c == 0.0 {
                    t
                } else if c * t >= 1.0 {
                    1.0
                } else if c <= 1.0 {
                    t + c * t * (1.0 / t).ln()
                } else {
                    let ct = c * t;
                    ct * (1.0 - ct.ln())
                }
            }
            Fdr0Curve::Empirical(e) => {
                let terms: Vec<f64> = e
                    .knots
                    .iter()
                    .map(|&s| if s <= t { 1.0 } else { (t / s).min(1.0) })
                    .collect();
                pairwise_sum(&terms) / e.knots.len() as f64
            }
        }
    }
}

/// Named bound with its parameters and clamping flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub n: Option<u64>,
    pub n0: Option<u64>,
    pub pi0: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub value: f64,
    pub clamped: bool,
}

impl BoundReport {
    fn new(name: &str, raw: f64) -> Self {
        BoundReport {
            name: name.to_string(),
            n: None,
            n0: None,
            pi0: None,
            alpha: None,
            gamma: None,
            c: None,
            value: raw.clamp(0.0, 1.0),
            clamped: raw > 1.0,
        }
    }

    pub const CSV_HEADER: [&'static str; 8] =
        ["bound_name", "n", "n0", "pi0", "alpha", "gamma", "value", "clamped_flag"];
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.name, self.value)?;
        if self.clamped {
            write!(f, " (clamped)")?;
        }
        Ok(())
    }
}

/// FDR-linking bound `pi0 a + pi0 a * integral_{pi0 a}^1 F(x)/x^2 dx`, in [0, 1].
pub fn fdr_link_bound(pi0: f64, alpha: f64, curve: &Fdr0Curve) -> Result<f64> {
    Ok(fdr_link_report(pi0, alpha, curve)?.value)
}

pub fn fdr_link_report(pi0: f64, alpha: f64, curve: &Fdr0Curve) -> Result<BoundReport> {
    check_alpha(alpha)?;
    check_pi0(pi0)?;
    curve.validate()?;
    let mut r = BoundReport::new("fdr_link", curve.linking_functional(pi0 * alpha));
    r.pi0 = Some(pi0);
    r.alpha = Some(alpha);
    if let Fdr0Curve::Linear(c) = curve {
        r.c = Some(*c);
    }
    Ok(r)
}

/// `alpha + alpha log(1/alpha)`, the PRDN bound for compliant procedures.
pub fn prdn_bound(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha + alpha * (1.0 / alpha).ln())
}

/// Strengthened PRDN bound `t + t log(1/t)`, `t = pi0 alpha`.
pub fn prdn_bound_pi0(pi0: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_pi0(pi0)?;
    let t = pi0 * alpha;
    Ok(t + t * (1.0 / t).ln())
}

pub fn prdn_report(pi0: f64, alpha: f64) -> Result<BoundReport> {
    let mut r = BoundReport::new("prdn", prdn_bound_pi0(pi0, alpha)?);
    r.pi0 = Some(pi0);
    r.alpha = Some(alpha);
    Ok(r)
}

/// Harmonic number `S(n) = 1 + 1/2 + ... + 1/n`, summed smallest term first
/// with compensation.
pub fn harmonic(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(FdrError::InvalidArgument("harmonic number of 0".into()));
    }
    Ok(compensated_sum((1..=n).rev().map(|k| 1.0 / k as f64)))
}

/// Log-correction bound `min{S(n) pi0 alpha, 1}`.
pub fn log_correction_bound(n: u64, pi0: f64, alpha: f64) -> Result<f64> {
    Ok(log_correction_report(n, pi0, alpha)?.value)
}

pub fn log_correction_report(n: u64, pi0: f64, alpha: f64) -> Result<BoundReport> {
    check_alpha(alpha)?;
    check_pi0(pi0)?;
    let mut r = BoundReport::new("log_correction", harmonic(n)? * pi0 * alpha);
    r.n = Some(n);
    r.pi0 = Some(pi0);
    r.alpha = Some(alpha);
    Ok(r)
}

/// Bound under arbitrary dependence obtained by linking with
/// `F(x) = min{S(n0) x, 1}`: 1 once `alpha >= 1/(pi0 S(n0))`, else
/// `S(n0) pi0 alpha log(e / (S(n0) pi0 alpha))`.
pub fn arbitrary_dep_bound(n0: u64, pi0: f64, alpha: f64) -> Result<f64> {
    Ok(arbitrary_dep_report(n0, pi0, alpha)?.value)
}

pub fn arbitrary_dep_report(n0: u64, pi0: f64, alpha: f64) -> Result<BoundReport> {
    check_alpha(alpha)?;
    check_pi0(pi0)?;
    let s = harmonic(n0)?;
    let x = s * pi0 * alpha;
    let raw = if x >= 1.0 { 1.0 } else { x * (1.0 - x.ln()) };
    let mut r = BoundReport::new("arbitrary_dependence", raw);
    r.n0 = Some(n0);
    r.pi0 = Some(pi0);
    r.alpha = Some(alpha);
    Ok(r)
}

/// Open interval of `alpha` on which [`arbitrary_dep_bound`] is strictly
/// below [`log_correction_bound`], intersected with (0, 1). `None` when empty.
pub fn improvement_range(n: u64, n0: u64, pi0: f64) -> Result<Option<(f64, f64)>> {
    check_pi0(pi0)?;
    if n0 == 0 || n < n0 {
        return Err(FdrError::InconsistentCounts(format!(
            "need n >= n0 >= 1, got n = {n}, n0 = {n0}"
        )));
    }
    let s_n = harmonic(n)?;
    let s_n0 = harmonic(n0)?;
    let upper = 1.0 / (pi0 * s_n0);
    let lower = (1.0 - s_n / s_n0).exp() * upper;
    let (lo, hi) = (lower.max(0.0), upper.min(1.0));
    Ok(if lo < hi { Some((lo, hi)) } else { None })
}

/// FDX bound `min{pi0 alpha / gamma, 1}` under PRDN.
pub fn fdx_bound(pi0: f64, alpha: f64, gamma: f64) -> Result<f64> {
    Ok(fdx_report(pi0, alpha, gamma)?.value)
}

pub fn fdx_report(pi0: f64, alpha: f64, gamma: f64) -> Result<BoundReport> {
    check_alpha(alpha)?;
    check_pi0(pi0)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(FdrError::InvalidGamma(gamma));
    }
    let mut r = BoundReport::new("fdx", pi0 * alpha / gamma);
    r.pi0 = Some(pi0);
    r.alpha = Some(alpha);
    r.gamma = Some(gamma);
    Ok(r)
}

/// Global-null FDR `min{S(n) alpha, 1}` attained by a known worst-case joint
/// law; a reference curve for classes that are not FDR-consistent.
pub fn guo_rao_reference(n: u64, alpha: f64) -> Result<f64> {
    Ok(guo_rao_report(n, alpha)?.value)
}

pub fn guo_rao_report(n: u64, alpha: f64) -> Result<BoundReport> {
    check_alpha(alpha)?;
    let mut r = BoundReport::new("guo_rao", harmonic(n)? * alpha);
    r.n = Some(n);
    r.alpha = Some(alpha);
    Ok(r)
}
