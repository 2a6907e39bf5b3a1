//! Structural sufficient conditions for Gaussian p-values: PRDN/PRDS sign
//! patterns of the covariance, the MTP2 sign condition for two-sided
//! p-values, and conditional-mean slopes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::signs::ParityUnionFind;
use crate::error::{FdrError, Result};

/// Entries of `K = -Sigma0^{-1}` with `|K_ij| <= ZERO_TOLERANCE * max|K|`
/// impose no sign constraint.
pub const ZERO_TOLERANCE: f64 = 1e-10;

/// Diagonal of a `+-1` matrix `B`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignAssignment {
    signs: Vec<i8>,
}

impl SignAssignment {
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Largest violation of "off-diagonal entries of `-B Sigma0^{-1} B` are
    /// non-negative", i.e. `max(0, -min_{i != j} b_i b_j K_ij)`.
    pub fn violation(&self, k: &DMatrix<f64>) -> f64 {
        let n = self.signs.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let v = (self.signs[i] * self.signs[j]) as f64 * k[(i, j)];
                    worst = worst.max(-v);
                }
            }
        }
        worst
    }
}

fn check_square(sigma: &DMatrix<f64>) -> Result<()> {
    if sigma.nrows() != sigma.ncols() || sigma.nrows() == 0 {
        return Err(FdrError::InvalidMatrix(format!(
            "expected a non-empty square matrix, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    Ok(())
}

fn check_indices(n: usize, idx: &[usize]) -> Result<()> {
    match idx.iter().find(|&&i| i >= n) {
        Some(&index) => Err(FdrError::IndexOutOfRange { index, len: n }),
        None => Ok(()),
    }
}

/// One-sided Gaussian p-values are PRDN when `Sigma_ij >= 0` for all null
/// pairs.
pub fn prdn_check_gaussian(sigma: &DMatrix<f64>, null_idx: &[usize]) -> Result<bool> {
    check_square(sigma)?;
    check_indices(sigma.nrows(), null_idx)?;
    Ok(null_idx
        .iter()
        .all(|&i| null_idx.iter().all(|&j| sigma[(i, j)] >= 0.0)))
}

/// PRDS additionally needs `Sigma_ij >= 0` between every null and non-null.
pub fn prds_check_gaussian(sigma: &DMatrix<f64>, null_idx: &[usize]) -> Result<bool> {
    if !prdn_check_gaussian(sigma, null_idx)? {
        return Ok(false);
    }
    let n = sigma.nrows();
    let mut is_null = vec![false; n];
    for &i in null_idx {
        is_null[i] = true;
    }
    Ok(null_idx
        .iter()
        .all(|&i| (0..n).filter(|&j| !is_null[j]).all(|j| sigma[(i, j)] >= 0.0)))
}

/// `K = -Sigma0^{-1}`.
pub fn negative_precision(sigma0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(sigma0)?;
    let inv = sigma0.clone().try_inverse().ok_or(FdrError::SingularMatrix)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(FdrError::SingularMatrix);
    }
    Ok(-inv)
}

/// Finds `B = diag(+-1)` making every off-diagonal entry of
/// `-B Sigma0^{-1} B` non-negative, or `None` if no such `B` exists.
///
/// Each non-negligible `K_ij` forces `b_i b_j = sign(K_ij)`; the constraints
/// are propagated with a parity union-find and a contradiction means no
/// assignment exists. Components are anchored at `+1`.
pub fn mtp2_sign_check(sigma0: &DMatrix<f64>) -> Result<Option<SignAssignment>> {
    let k = negative_precision(sigma0)?;
    Ok(solve_sign_constraints(&k))
}

pub(crate) fn solve_sign_constraints(k: &DMatrix<f64>) -> Option<SignAssignment> {
    let n = k.nrows();
    let scale = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = ZERO_TOLERANCE * scale;
    let mut uf = ParityUnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = k[(i, j)];
            if v.abs() <= tol {
                continue;
            }
            if !uf.unite(i, j, v < 0.0) {
                return None;
            }
        }
    }
    let signs = (0..n)
        .map(|i| if uf.find(i).1 { -1 } else { 1 })
        .collect();
    Some(SignAssignment { signs })
}

/// Slope `Sigma0_{i,-i} / Sigma0_{i,i}` of the conditional mean of the other
/// nulls given coordinate `i`.
pub fn conditional_slope(sigma0: &DMatrix<f64>, i: usize) -> Result<Vec<f64>> {
    check_square(sigma0)?;
    check_indices(sigma0.nrows(), &[i])?;
    let var = sigma0[(i, i)];
    if var == 0.0 {
        return Err(FdrError::SingularMatrix);
    }
    Ok((0..sigma0.ncols())
        .filter(|&j| j != i)
        .map(|j| sigma0[(i, j)] / var)
        .collect())
}

/// Conditional covariance `Sigma0_{-i,-i} - Sigma0_{-i,i} Sigma0_{i,-i} / Sigma0_{i,i}`.
pub fn conditional_covariance(sigma0: &DMatrix<f64>, i: usize) -> Result<DMatrix<f64>> {
    let slope = conditional_slope(sigma0, i)?;
    let rest: Vec<usize> = (0..sigma0.nrows()).filter(|&j| j != i).collect();
    let var = sigma0[(i, i)];
    Ok(DMatrix::from_fn(rest.len(), rest.len(), |a, b| {
        sigma0[(rest[a], rest[b])] - slope[a] * slope[b] * var
    }))
}

/// Parses a dense matrix: one row per line, whitespace-separated decimals.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_dense_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    FdrError::InvalidMatrix(format!("line {}: cannot parse {tok:?}", line_no + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(FdrError::InvalidMatrix(format!(
                    "line {}: expected {} columns, found {}",
                    line_no + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(FdrError::InvalidMatrix("no rows".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Symmetric, unit-diagonal and positive semidefinite (smallest eigenvalue
/// at least `-1e-10`).
pub fn validate_correlation(sigma: &DMatrix<f64>) -> Result<()> {
    check_square(sigma)?;
    let n = sigma.nrows();
    for i in 0..n {
        if (sigma[(i, i)] - 1.0).abs() > 1e-12 {
            return Err(FdrError::InvalidMatrix(format!(
                "diagonal entry {i} is {} instead of 1",
                sigma[(i, i)]
            )));
        }
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                return Err(FdrError::InvalidMatrix(format!("not symmetric at ({i}, {j})")));
            }
        }
    }
    let min_eig = sigma
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    if min_eig < -1e-10 {
        return Err(FdrError::NotPositiveSemidefinite(min_eig));
    }
    Ok(())
}

/// Symmetric square root `V diag(sqrt(max(lambda, 0))) V^T` of a PSD matrix.
pub fn psd_sqrt(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sigma.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn prdn_prds_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!(prdn_check_gaussian(&id, &[0, 1]).unwrap());
        assert!(prds_check_gaussian(&id, &[0, 1]).unwrap());

        let s = m(&[&[1.0, 0.3, -0.2], &[0.3, 1.0, 0.1], &[-0.2, 0.1, 1.0]]);
        assert!(prdn_check_gaussian(&s, &[0, 1]).unwrap());
        assert!(!prds_check_gaussian(&s, &[0, 1]).unwrap());

        let s = m(&[&[1.0, -0.3, 0.2], &[-0.3, 1.0, 0.1], &[0.2, 0.1, 1.0]]);
        assert!(!prdn_check_gaussian(&s, &[0, 1]).unwrap());
        assert!(!prds_check_gaussian(&s, &[0, 1]).unwrap());

        assert!(prdn_check_gaussian(&id, &[3]).is_err());
    }

    #[test]
    fn mtp2_examples() {
        let s = m(&[&[1.0, 0.4], &[0.4, 1.0]]);
        let b = mtp2_sign_check(&s).unwrap().unwrap();
        assert_eq!(b.signs(), &[1, 1]);

        let rho = -0.2;
        let s = m(&[&[1.0, rho, rho], &[rho, 1.0, rho], &[rho, rho, 1.0]]);
        assert_eq!(mtp2_sign_check(&s).unwrap(), None);

        let d = DMatrix::from_diagonal_element(4, 4, 2.0);
        assert_eq!(mtp2_sign_check(&d).unwrap().unwrap().signs(), &[1, 1, 1, 1]);

        let singular = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(mtp2_sign_check(&singular), Err(FdrError::SingularMatrix)));
    }

    #[test]
    fn mtp2_negative_pair_flips_sign() {
        let s = m(&[&[1.0, -0.5], &[-0.5, 1.0]]);
        let b = mtp2_sign_check(&s).unwrap().unwrap();
        assert_eq!(b.signs(), &[1, -1]);
        assert_eq!(b.violation(&negative_precision(&s).unwrap()), 0.0);
    }

    #[test]
    fn slope_examples() {
        let d = DMatrix::<f64>::identity(3, 3);
        assert_eq!(conditional_slope(&d, 1).unwrap(), vec![0.0, 0.0]);
        let s = m(&[&[1.0, 0.35], &[0.35, 1.0]]);
        assert_eq!(conditional_slope(&s, 0).unwrap(), vec![0.35]);
        let cov = conditional_covariance(&s, 0).unwrap();
        assert!((cov[(0, 0)] - (1.0 - 0.35 * 0.35)).abs() < 1e-15);
        let z = m(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert!(conditional_slope(&z, 0).is_err());
    }

    #[test]
    fn parse_matrix() {
        let s = parse_dense_matrix("# cov\n1 0.5\n\n0.5 1\n").unwrap();
        assert_eq!(s, m(&[&[1.0, 0.5], &[0.5, 1.0]]));
        assert!(parse_dense_matrix("1 2\n3\n").is_err());
        assert!(parse_dense_matrix("1 x\n").is_err());
        assert!(parse_dense_matrix("\n").is_err());
    }

    #[test]
    fn correlation_validation() {
        assert!(validate_correlation(&m(&[&[1.0, 0.5], &[0.5, 1.0]])).is_ok());
        assert!(validate_correlation(&m(&[&[1.0, 1.5], &[1.5, 1.0]])).is_err());
        assert!(validate_correlation(&m(&[&[2.0, 0.0], &[0.0, 1.0]])).is_err());
        assert!(validate_correlation(&m(&[&[1.0, 0.2], &[0.1, 1.0]])).is_err());
    }
}
