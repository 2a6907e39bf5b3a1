//! Non-null constructions that push the FDP of compliant procedures up.
//!
//! Every construction here sets non-null p-values to 0 or 1. Zeros go to the
//! lowest non-null indices; the FDP does not depend on which slots get them.

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, FdrError, Result};
use crate::numeric::threshold_rank;
use crate::ratio::Ratio;
use crate::testing::{best_ratio, sorted, sorted_order, PValueStudy, RejectionOutcome};

/// How a Bonferroni-masked adversary turns `p_(2), ..., p_(n0)` into a count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskStrategy {
    /// Run the informed construction with `p_(2)` standing in for `p_(1)`.
    PlugInSecond,
    /// Maximize `j / ceil(n p_(j) / alpha)` over `j >= 2` only.
    ShiftedJStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversarySpec {
    /// Sees every null; sets `ceil(n p_(j*) / alpha) - j*` non-nulls to 0.
    Informed,
    /// Completion used by the most anti-conservative compliant procedure.
    MostAntiConservative,
    /// Sees every null except the smallest.
    BonferroniMasked(MaskStrategy),
    /// Exactly `k` zeros, the remaining non-nulls at 1.
    FixedZeros(usize),
}

/// Which index or count drove a completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversaryTrace {
    JStar(usize),
    JDiamond(usize),
    Masked(usize),
    Fixed(usize),
}

/// Nulls merged with adversarial non-nulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedStudy {
    pub study: PValueStudy,
    pub trace: AdversaryTrace,
    /// Number of non-null p-values set to 0.
    pub zeros: usize,
}

fn check_nulls(null_pvalues: &[f64]) -> Result<()> {
    if null_pvalues.is_empty() {
        return Err(FdrError::Empty("adversary needs at least one null"));
    }
    if let Some((index, &value)) = null_pvalues
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(FdrError::InvalidPValue { index, value });
    }
    Ok(())
}

fn check_counts(n0: usize, n1: usize, n: usize) -> Result<()> {
    if n0 + n1 != n {
        return Err(FdrError::InconsistentCounts(format!(
            "n0 + n1 = {} + {} != n = {}",
            n0, n1, n
        )));
    }
    Ok(())
}

/// `argmax_j j / ceil(n p_(j) / alpha)` (1-based), largest `j` on ties.
pub fn j_star(null_pvalues: &[f64], n: usize, alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    check_nulls(null_pvalues)?;
    Ok(best_ratio(&sorted(null_pvalues), n, alpha).0)
}

/// `(ceil(n p / alpha) - j)_+`.
fn surplus(p: f64, j: usize, n: usize, alpha: f64) -> usize {
    (threshold_rank(p, n as u64, alpha) as usize).saturating_sub(j)
}

/// Overwrites the non-null slots of `base`: the first `zeros` of them (by
/// index) become 0, the rest 1.
fn fill_non_nulls(base: &PValueStudy, zeros: usize) -> Result<PValueStudy> {
    let mut placed = 0usize;
    let pvalues = base
        .pvalues()
        .iter()
        .zip(base.null_mask())
        .map(|(&p, &null)| {
            if null {
                p
            } else if placed < zeros {
                placed += 1;
                0.0
            } else {
                1.0
            }
        })
        .collect();
    PValueStudy::new(pvalues, base.null_mask().to_vec())
}

fn leading_nulls(null_pvalues: &[f64], n1: usize) -> Result<PValueStudy> {
    let mut p = null_pvalues.to_vec();
    p.resize(null_pvalues.len() + n1, 1.0);
    PValueStudy::with_leading_nulls(p, null_pvalues.len())
}

/// Informed adversary: `min{(ceil(n p_(j*) / alpha) - j*)_+, n1}` zeros, the
/// rest ones. Nulls occupy the leading indices.
pub fn informed_adversary(
    null_pvalues: &[f64],
    n1: usize,
    n: usize,
    alpha: f64,
) -> Result<CompletedStudy> {
    check_counts(null_pvalues.len(), n1, n)?;
    AdversarySpec::Informed.apply(&leading_nulls(null_pvalues, n1)?, alpha)
}

/// `argmax` of `j / ceil(n p_(j) / alpha)` over `j` with
/// `ceil(n p_(j) / alpha) - j <= n1`; 0 when no `j` qualifies.
pub fn j_diamond(null_pvalues: &[f64], n1: usize, n: usize, alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    check_nulls(null_pvalues)?;
    Ok(j_diamond_sorted(&sorted(null_pvalues), n1, n, alpha))
}

fn j_diamond_sorted(sorted_nulls: &[f64], n1: usize, n: usize, alpha: f64) -> usize {
    let mut best = (0usize, Ratio::ZERO);
    for (k, &p) in sorted_nulls.iter().enumerate() {
        let j = k + 1;
        let c = threshold_rank(p, n as u64, alpha);
        if c.saturating_sub(j as u64) > n1 as u64 {
            continue;
        }
        let ratio = Ratio::new(j as u64, c);
        if best.0 == 0 || ratio >= best.1 {
            best = (j, ratio);
        }
    }
    best.0
}

/// The most anti-conservative compliant procedure on its own completion:
/// rejects the `j_diamond` smallest nulls together with
/// `(ceil(n p_(j_diamond) / alpha) - j_diamond)_+` zero-valued non-nulls.
pub fn most_anti_conservative(
    null_pvalues: &[f64],
    n1: usize,
    n: usize,
    alpha: f64,
) -> Result<(CompletedStudy, RejectionOutcome)> {
    check_counts(null_pvalues.len(), n1, n)?;
    let completed = AdversarySpec::MostAntiConservative.apply(&leading_nulls(null_pvalues, n1)?, alpha)?;
    let AdversaryTrace::JDiamond(jd) = completed.trace else {
        unreachable!("most anti-conservative completion records j_diamond");
    };
    if jd == 0 {
        return Ok((completed, RejectionOutcome::empty()));
    }
    let study = &completed.study;
    let order = sorted_order(study.pvalues());
    let mut chosen: Vec<usize> = order.iter().copied().filter(|&i| study.is_null(i)).take(jd).collect();
    chosen.extend(
        (0..study.n())
            .filter(|&i| !study.is_null(i) && study.pvalues()[i] == 0.0)
            .take(completed.zeros),
    );
    let outcome = RejectionOutcome::from_indices(study, chosen)?;
    Ok((completed, outcome))
}

/// Number of zeros set by a Bonferroni-masked adversary.
///
/// `remaining` holds `p_(2), ..., p_(n0)`; the smallest null is never seen.
#[allow(non_snake_case)]
pub fn bonferroni_masked_T(
    remaining: &[f64],
    n: usize,
    n1: usize,
    alpha: f64,
    strategy: MaskStrategy,
) -> Result<usize> {
    check_alpha(alpha)?;
    if remaining.is_empty() {
        return Err(FdrError::InvalidArgument(
            "Bonferroni-masked adversary needs n0 >= 2".into(),
        ));
    }
    check_nulls(remaining)?;
    let rest = sorted(remaining);
    let t = match strategy {
        MaskStrategy::PlugInSecond => {
            let mut proxy = Vec::with_capacity(rest.len() + 1);
            proxy.push(rest[0]);
            proxy.extend_from_slice(&rest);
            let (j, _) = best_ratio(&proxy, n, alpha);
            surplus(proxy[j - 1], j, n, alpha)
        }
        MaskStrategy::ShiftedJStar => {
            let mut best = (2usize, Ratio::ZERO);
            for (k, &p) in rest.iter().enumerate() {
                let j = k + 2;
                let ratio = Ratio::new(j as u64, threshold_rank(p, n as u64, alpha));
                if ratio >= best.1 {
                    best = (j, ratio);
                }
            }
            surplus(rest[best.0 - 2], best.0, n, alpha)
        }
    };
    Ok(t.min(n1))
}

impl AdversarySpec {
    /// Replaces the non-null p-values of `study`, leaving nulls untouched.
    pub fn apply(&self, study: &PValueStudy, alpha: f64) -> Result<CompletedStudy> {
        let (trace, zeros) = self.zeros_for(&study.null_pvalues(), study.n1(), alpha)?;
        Ok(CompletedStudy {
            study: fill_non_nulls(study, zeros)?,
            trace,
            zeros,
        })
    }

    /// How many of the `n1` non-nulls this construction sets to 0 (the rest
    /// go to 1), given the nulls in any order.
    pub fn zeros_for(
        &self,
        nulls: &[f64],
        n1: usize,
        alpha: f64,
    ) -> Result<(AdversaryTrace, usize)> {
        check_alpha(alpha)?;
        let n = nulls.len() + n1;
        Ok(match *self {
            AdversarySpec::FixedZeros(k) => {
                if k > n1 {
                    return Err(FdrError::Incompatible(format!(
                        "{k} fixed zeros but only {n1} non-nulls"
                    )));
                }
                (AdversaryTrace::Fixed(k), k)
            }
            AdversarySpec::Informed => {
                check_nulls(nulls)?;
                let s = sorted(nulls);
                let (j, _) = best_ratio(&s, n, alpha);
                (AdversaryTrace::JStar(j), surplus(s[j - 1], j, n, alpha).min(n1))
            }
            AdversarySpec::MostAntiConservative => {
                check_nulls(nulls)?;
                let s = sorted(nulls);
                let jd = j_diamond_sorted(&s, n1, n, alpha);
                let zeros = if jd == 0 { 0 } else { surplus(s[jd - 1], jd, n, alpha) };
                (AdversaryTrace::JDiamond(jd), zeros)
            }
            AdversarySpec::BonferroniMasked(strategy) => {
                if nulls.len() < 2 {
                    return Err(FdrError::Incompatible(
                        "Bonferroni-masked adversary needs n0 >= 2".into(),
                    ));
                }
                let s = sorted(nulls);
                let t = bonferroni_masked_T(&s[1..], n, n1, alpha, strategy)?;
                (AdversaryTrace::Masked(t), t)
            }
        })
    }
}
