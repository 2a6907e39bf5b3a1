//! Summation helpers and the rejection-threshold arithmetic shared by every
//! procedure and bound.

/// Step-up critical value `alpha * j / n`.
///
/// Every comparison of a p-value against a BH-type threshold goes through
/// this function so that procedures, bounds and adversaries agree bit for bit.
#[inline]
pub fn critical_value(alpha: f64, j: u64, n: u64) -> f64 {
    alpha * j as f64 / n as f64
}

/// Smallest integer `r >= 1` with `p <= critical_value(alpha, r, n)`.
///
/// This is `max(ceil(n * p / alpha), 1)`, evaluated so that it is consistent
/// with [`critical_value`]: a naive `ceil` of the floating-point quotient can
/// land one off when `n * p / alpha` sits within an ulp of an integer. The
/// estimate is corrected by stepping against the actual threshold test.
pub fn threshold_rank(p: f64, n: u64, alpha: f64) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p));
    let x = n as f64 * p / alpha;
    let mut r = if x <= 1.0 { 1 } else { x.ceil() as u64 };
    while r > 1 && p <= critical_value(alpha, r - 1, n) {
        r -= 1;
    }
    while p > critical_value(alpha, r, n) {
        r += 1;
    }
    r
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Pairwise (cascade) summation in a fixed order.
///
/// Monotone in every summand, which keeps step-function bound evaluations
/// non-decreasing under rounding.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for &v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Asymptotic Kolmogorov-Smirnov critical value `sqrt(-ln(level / 2) / 2) / sqrt(m)`
/// for `m` samples; `level = 0.01` gives `1.6276 / sqrt(m)`.
pub fn ks_critical_value(m: usize, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (m as f64).sqrt()
}

/// `sup_x |F_m(x) - G(x)|` for samples `xs` against a continuous CDF `g`.
pub fn ks_distance<G: Fn(f64) -> f64>(xs: &[f64], g: G) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let gx = g(x);
        d.max((i + 1) as f64 / m - gx).max(gx - i as f64 / m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_matches_ceiling_away_from_boundaries() {
        assert_eq!(threshold_rank(0.02, 10, 0.1), 2);
        assert_eq!(threshold_rank(0.5, 10, 0.1), 50);
        assert_eq!(threshold_rank(0.0, 10, 0.1), 1);
        assert_eq!(threshold_rank(0.001, 10, 0.1), 1);
        assert_eq!(threshold_rank(1.0, 4, 0.5), 8);
    }

    #[test]
    fn rank_is_consistent_with_threshold_test() {
        // 0.1 * 3 / 10 = 0.030000000000000002 in binary, so 0.03 passes at r = 3.
        let p = 0.03;
        let r = threshold_rank(p, 10, 0.1);
        assert!(p <= critical_value(0.1, r, 10));
        assert!(r == 1 || p > critical_value(0.1, r - 1, 10));
        for k in 1..200u64 {
            let p = k as f64 / 200.0;
            for &alpha in &[0.05, 0.1, 0.3] {
                let r = threshold_rank(p, 7, alpha);
                assert!(p <= critical_value(alpha, r, 7));
                assert!(r == 1 || p > critical_value(alpha, r - 1, 7));
            }
        }
    }

    #[test]
    fn sums_agree() {
        let v: Vec<f64> = (1..=10_000).map(|k| 1.0 / k as f64).collect();
        let a = compensated_sum(v.iter().copied());
        let b = pairwise_sum(&v);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ks_helpers() {
        assert!((ks_critical_value(1, 0.01) - 1.627_624).abs() < 1e-6);
        assert!((ks_critical_value(100, 0.05) - 0.135_810).abs() < 1e-6);
        assert!((ks_distance(&[0.5], |x| x) - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_distance(&grid, |x| x) - 0.005).abs() < 1e-12);
    }
}
