//! Multiple-testing procedures, compliance and FDP accounting.
//!
//! A procedure is *compliant* at level `alpha` when every p-value it rejects
//! satisfies `p <= alpha * R / n`, with `R` its own number of rejections. The
//! step-up BH procedure is the largest compliant procedure; step-down BH and
//! the FDP-maximizing rule in [`max_fdp_compliant`] are further members.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, FdrError, Result};
use crate::numeric::{critical_value, threshold_rank};
use crate::ratio::Ratio;

/// A vector of p-values together with the set of true nulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueStudy {
    pvalues: Vec<f64>,
    null_mask: Vec<bool>,
}

impl PValueStudy {
    pub fn new(pvalues: Vec<f64>, null_mask: Vec<bool>) -> Result<Self> {
        if pvalues.is_empty() {
            return Err(FdrError::Empty("study needs at least one p-value"));
        }
        if pvalues.len() != null_mask.len() {
            return Err(FdrError::MaskLengthMismatch {
                pvalues: pvalues.len(),
                mask: null_mask.len(),
            });
        }
        if let Some((index, &value)) = pvalues
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(FdrError::InvalidPValue { index, value });
        }
        Ok(PValueStudy { pvalues, null_mask })
    }

    /// Study whose first `n0` entries are nulls.
    pub fn with_leading_nulls(pvalues: Vec<f64>, n0: usize) -> Result<Self> {
        if n0 > pvalues.len() {
            return Err(FdrError::InconsistentCounts(format!(
                "n0 = {n0} exceeds n = {}",
                pvalues.len()
            )));
        }
        let mask = (0..pvalues.len()).map(|i| i < n0).collect();
        Self::new(pvalues, mask)
    }

    /// Study containing only nulls.
    pub fn global_null(pvalues: Vec<f64>) -> Result<Self> {
        let n0 = pvalues.len();
        Self::with_leading_nulls(pvalues, n0)
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    pub fn null_mask(&self) -> &[bool] {
        &self.null_mask
    }

    pub fn is_null(&self, index: usize) -> bool {
        self.null_mask[index]
    }

    pub fn n(&self) -> usize {
        self.pvalues.len()
    }

    pub fn n0(&self) -> usize {
        self.null_mask.iter().filter(|&&b| b).count()
    }

    pub fn n1(&self) -> usize {
        self.n() - self.n0()
    }

    pub fn pi0(&self) -> f64 {
        self.n0() as f64 / self.n() as f64
    }

    /// Null p-values in index order.
    pub fn null_pvalues(&self) -> Vec<f64> {
        self.select(true)
    }

    pub fn non_null_pvalues(&self) -> Vec<f64> {
        self.select(false)
    }

    fn select(&self, null: bool) -> Vec<f64> {
        self.pvalues
            .iter()
            .zip(&self.null_mask)
            .filter(|(_, &m)| m == null)
            .map(|(&p, _)| p)
            .collect()
    }

    /// Returns the study with entries permuted: entry `i` of the result is
    /// entry `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(FdrError::InconsistentCounts("permutation length".into()));
        }
        let p = perm.iter().map(|&i| self.pvalues[i]).collect();
        let m = perm.iter().map(|&i| self.null_mask[i]).collect();
        Self::new(p, m)
    }
}

/// Rejection set with its counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionOutcome {
    rejected: Vec<usize>,
    false_rejections: usize,
}

impl RejectionOutcome {
    pub fn empty() -> Self {
        RejectionOutcome {
            rejected: Vec::new(),
            false_rejections: 0,
        }
    }

    /// Validates indices against `study`; they must be unique and in range.
    pub fn from_indices(study: &PValueStudy, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(FdrError::DuplicateIndex(w[0]));
            }
        }
        if let Some(&index) = indices.iter().find(|&&i| i >= study.n()) {
            return Err(FdrError::IndexOutOfRange {
                index,
                len: study.n(),
            });
        }
        let false_rejections = indices.iter().filter(|&&i| study.is_null(i)).count();
        Ok(RejectionOutcome {
            rejected: indices,
            false_rejections,
        })
    }

    /// Rejected indices, ascending.
    pub fn rejected(&self) -> &[usize] {
        &self.rejected
    }

    /// R.
    pub fn rejections(&self) -> usize {
        self.rejected.len()
    }

    /// V.
    pub fn false_rejections(&self) -> usize {
        self.false_rejections
    }

    /// `V / max(R, 1)` as an exact ratio.
    pub fn fdp(&self) -> Ratio {
        Ratio::new(
            self.false_rejections as u64,
            self.rejected.len().max(1) as u64,
        )
    }
}

/// Index order of `values` sorted by `(value, index)`.
pub fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Ascending copy of `values`.
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `counts[j]` = number of p-values whose threshold rank equals `j`, for
/// `1 <= j <= n`; ranks beyond `n` are dropped.
fn rank_histogram(pvalues: &[f64], alpha: f64) -> Vec<usize> {
    let n = pvalues.len();
    let mut counts = vec![0usize; n + 1];
    for &p in pvalues {
        let r = threshold_rank(p, n as u64, alpha);
        if r as usize <= n {
            counts[r as usize] += 1;
        }
    }
    counts
}

fn reject_below(study: &PValueStudy, alpha: f64, r: usize) -> RejectionOutcome {
    if r == 0 {
        return RejectionOutcome::empty();
    }
    let cut = critical_value(alpha, r as u64, study.n() as u64);
    let rejected: Vec<usize> = (0..study.n())
        .filter(|&i| study.pvalues[i] <= cut)
        .collect();
    let false_rejections = rejected.iter().filter(|&&i| study.is_null(i)).count();
    RejectionOutcome {
        rejected,
        false_rejections,
    }
}

/// Step-up BH: `R = max{j : p_(j) <= alpha j / n}`, rejecting every
/// `p_i <= alpha R / n`.
///
/// Runs in O(n) by bucketing each p-value at its threshold rank; `p_(j) <=
/// alpha j / n` holds exactly when at least `j` p-values have rank `<= j`.
pub fn bh_step_up(study: &PValueStudy, alpha: f64) -> Result<RejectionOutcome> {
    check_alpha(alpha)?;
    let counts = rank_histogram(&study.pvalues, alpha);
    let mut cumulative = 0usize;
    let mut r = 0usize;
    for (j, &c) in counts.iter().enumerate().skip(1) {
        cumulative += c;
        if cumulative >= j {
            r = j;
        }
    }
    Ok(reject_below(study, alpha, r))
}

/// Step-down BH: the largest `k` with `p_(j) <= alpha j / n` for all `j <= k`.
pub fn bh_step_down(study: &PValueStudy, alpha: f64) -> Result<RejectionOutcome> {
    check_alpha(alpha)?;
    let counts = rank_histogram(&study.pvalues, alpha);
    let mut cumulative = 0usize;
    let mut r = 0usize;
    for (j, &c) in counts.iter().enumerate().skip(1) {
        cumulative += c;
        if cumulative < j {
            break;
        }
        r = j;
    }
    // At the stopping point exactly r p-values lie below the r-th threshold.
    Ok(reject_below(study, alpha, r))
}

/// True iff every rejected `p_j <= alpha R / n`.
pub fn is_compliant(study: &PValueStudy, outcome: &RejectionOutcome, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    let r = outcome.rejections();
    if let Some(&index) = outcome.rejected().iter().find(|&&i| i >= study.n()) {
        return Err(FdrError::IndexOutOfRange {
            index,
            len: study.n(),
        });
    }
    if r == 0 {
        return Ok(true);
    }
    let cut = critical_value(alpha, r as u64, study.n() as u64);
    Ok(outcome.rejected().iter().all(|&i| study.pvalues[i] <= cut))
}

/// Simes combination `min_j n0 p_(j) / j`, capped at 1.
pub fn simes_pvalue(null_pvalues: &[f64]) -> Result<f64> {
    if null_pvalues.is_empty() {
        return Err(FdrError::Empty("Simes p-value of no hypotheses"));
    }
    Ok(simes_of_sorted(&sorted(null_pvalues)))
}

pub(crate) fn simes_of_sorted(sorted_nulls: &[f64]) -> f64 {
    let n0 = sorted_nulls.len() as f64;
    sorted_nulls
        .iter()
        .enumerate()
        .map(|(j, &p)| n0 * p / (j + 1) as f64)
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
}

/// Whether the Simes test rejects the global null at level `x`.
pub fn simes_rejects(null_pvalues: &[f64], x: f64) -> Result<bool> {
    if !(x > 0.0 && x < 1.0) {
        return Err(FdrError::InvalidArgument(format!(
            "Simes level must lie in (0, 1), got {x}"
        )));
    }
    Ok(simes_pvalue(null_pvalues)? <= x)
}

/// Exact FDP ceiling `min{ max_j j / ceil(n p_(j) / alpha), 1 }` shared by
/// every compliant procedure.
///
/// Ceilings use [`threshold_rank`], which never returns 0; a zero null
/// p-value therefore forces the bound to 1.
pub fn fdp_upper_bound_ratio(null_pvalues: &[f64], n: usize, alpha: f64) -> Result<Ratio> {
    check_alpha(alpha)?;
    if n < null_pvalues.len() {
        return Err(FdrError::InconsistentCounts(format!(
            "n = {n} is smaller than the {} nulls",
            null_pvalues.len()
        )));
    }
    if null_pvalues.is_empty() {
        return Ok(Ratio::ZERO);
    }
    Ok(best_ratio(&sorted(null_pvalues), n, alpha).1.capped())
}

pub fn fdp_upper_bound(null_pvalues: &[f64], n: usize, alpha: f64) -> Result<f64> {
    fdp_upper_bound_ratio(null_pvalues, n, alpha).map(Ratio::to_f64)
}

/// `(j, j / ceil(n p_(j) / alpha))` maximizing the ratio over sorted nulls,
/// largest `j` on ties. 1-based `j`.
pub(crate) fn best_ratio(sorted_nulls: &[f64], n: usize, alpha: f64) -> (usize, Ratio) {
    let mut best = (0usize, Ratio::ZERO);
    for (k, &p) in sorted_nulls.iter().enumerate() {
        let j = k + 1;
        let ratio = Ratio::new(j as u64, threshold_rank(p, n as u64, alpha));
        if ratio >= best.1 {
            best = (j, ratio);
        }
    }
    best
}

/// The compliant rejection set with the largest FDP on a fixed study.
///
/// For every candidate `R`, at most `V(R)` nulls and `K(R)` non-nulls sit
/// below `alpha R / n`; a compliant outcome of size `R` exists iff
/// `V(R) + K(R) >= R` and then the best FDP is `min(V(R), R) / R`. Ties
/// prefer the larger `R`. Rejected nulls and non-nulls are the smallest by
/// `(value, index)`.
pub fn max_fdp_compliant(study: &PValueStudy, alpha: f64) -> Result<RejectionOutcome> {
    check_alpha(alpha)?;
    let n = study.n();
    let mut null_counts = vec![0usize; n + 1];
    let mut other_counts = vec![0usize; n + 1];
    for (i, &p) in study.pvalues.iter().enumerate() {
        let r = threshold_rank(p, n as u64, alpha) as usize;
        if r <= n {
            if study.is_null(i) {
                null_counts[r] += 1;
            } else {
                other_counts[r] += 1;
            }
        }
    }
    let (mut v_cum, mut k_cum) = (0usize, 0usize);
    let mut best: Option<(usize, usize, Ratio)> = None;
    for r in 1..=n {
        v_cum += null_counts[r];
        k_cum += other_counts[r];
        if v_cum + k_cum < r {
            continue;
        }
        let v = v_cum.min(r);
        let fdp = Ratio::new(v as u64, r as u64);
        if best.is_none_or(|(_, _, b)| fdp.cmp(&b) != Ordering::Less) {
            best = Some((r, v, fdp));
        }
    }
    let Some((r, v, fdp)) = best else {
        return Ok(RejectionOutcome::empty());
    };
    if fdp == Ratio::ZERO {
        return Ok(RejectionOutcome::empty());
    }
    let order = sorted_order(&study.pvalues);
    let mut chosen: Vec<usize> = order.iter().copied().filter(|&i| study.is_null(i)).take(v).collect();
    chosen.extend(order.iter().copied().filter(|&i| !study.is_null(i)).take(r - v));
    RejectionOutcome::from_indices(study, chosen)
}
