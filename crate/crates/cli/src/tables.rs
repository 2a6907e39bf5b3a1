use fdrlink_core::bounds::{
    arbitrary_dep_bound, arbitrary_dep_report, fdx_report, guo_rao_report, harmonic, log_correction_report,
    prdn_report, BoundReport,
};
use fdrlink_core::dependence::{
    min_equicorrelation, mtp2_sign_check, negative_precision, prdn_check_gaussian, prds_check_gaussian,
    validate_correlation, vanishing_null_family, VanishingSchedule,
};
use fdrlink_core::mc::{estimate_fdr, replication_seed, simes_samples, McConfig};
use fdrlink_core::{AdversarySpec, DMatrix, FdrError, GeneratorSpec, McEstimate, Procedure, Sidedness, WithinBlock};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::output::{Cell, Series, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsParams {
    pub n: u64,
    pub n0: u64,
    /// Defaults to `n0 / n`.
    pub pi0: Option<f64>,
    pub alphas: Vec<f64>,
    pub gamma: Option<f64>,
}

fn report_row(r: &BoundReport) -> Vec<Cell> {
    vec![
        r.name.as_str().into(),
        r.n.into(),
        r.n0.into(),
        r.pi0.into(),
        r.alpha.into(),
        r.gamma.into(),
        r.value.into(),
        r.clamped.into(),
    ]
}

/// Every closed-form bound at each level, one row per (bound, alpha).
pub fn bounds_table(p: &BoundsParams) -> Result<Table> {
    if p.alphas.is_empty() {
        return Err(FdrError::Empty("alpha grid").into());
    }
    if p.n0 == 0 || p.n < p.n0 {
        return Err(FdrError::InconsistentCounts(format!("need n >= n0 >= 1, got n = {}, n0 = {}", p.n, p.n0)).into());
    }
    let pi0 = p.pi0.unwrap_or(p.n0 as f64 / p.n as f64);
    let mut t = Table::new("bounds", &BoundReport::CSV_HEADER);
    for &alpha in &p.alphas {
        let mut reports = vec![
            prdn_report(pi0, alpha)?,
            log_correction_report(p.n, pi0, alpha)?,
            arbitrary_dep_report(p.n0, pi0, alpha)?,
            guo_rao_report(p.n, alpha)?,
        ];
        if let Some(g) = p.gamma {
            reports.push(fdx_report(pi0, alpha, g)?);
        }
        for r in &reports {
            t.push(report_row(r));
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyClass {
    /// Nulls from an equicorrelated normal law with `rho < 0`, one- or two-sided.
    NegativeEquicorrelation,
    /// Arbitrary dependence with `n0 log n0 / n` bounded.
    VanishingNullProportion,
    /// Two-sided p-values built from one-sided PRDN ones.
    TwoSided,
    /// Independent blocks of size at most 3.
    Block,
    /// The worst-case global-null law with FDR `min{S(n) alpha, 1}`.
    GuoRao,
}

impl ConsistencyClass {
    pub const ALL: [ConsistencyClass; 5] = [
        ConsistencyClass::NegativeEquicorrelation,
        ConsistencyClass::VanishingNullProportion,
        ConsistencyClass::TwoSided,
        ConsistencyClass::Block,
        ConsistencyClass::GuoRao,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConsistencyClass::NegativeEquicorrelation => "negative_equicorrelation",
            ConsistencyClass::VanishingNullProportion => "vanishing_null_proportion",
            ConsistencyClass::TwoSided => "two_sided",
            ConsistencyClass::Block => "block",
            ConsistencyClass::GuoRao => "guo_rao",
        }
    }

    /// Class-level constant the curve is compared with, if there is one.
    fn reference(self, alpha: f64, members: &[Member]) -> Result<Option<f64>> {
        Ok(match self {
            ConsistencyClass::NegativeEquicorrelation => None,
            ConsistencyClass::VanishingNullProportion => {
                let mut worst = 0.0f64;
                for m in members {
                    if let Member::WithNonNulls(label, g, _) = m {
                        let b = arbitrary_dep_bound(g.n0() as u64, g.pi0(), alpha)
                            .map_err(|e| FdrError::InvalidArgument(format!("{label}: {e}")))?;
                        worst = worst.max(b);
                    }
                }
                Some(worst)
            }
            ConsistencyClass::TwoSided => Some((2.0 * alpha).min(1.0)),
            ConsistencyClass::Block => Some((3.0 * alpha).min(1.0)),
            ConsistencyClass::GuoRao => Some((harmonic(10_000)? * alpha).min(1.0)),
        })
    }

    fn members(self) -> Vec<Member> {
        let equi = |n: usize, rho: f64, sided: Sidedness| GeneratorSpec::EquicorrelatedNormal {
            n,
            n0: n,
            rho,
            sided,
            mu_alt: 2.0,
        };
        match self {
            ConsistencyClass::NegativeEquicorrelation => {
                let mut out = Vec::new();
                for n0 in [10usize, 100, 1000] {
                    let lo = min_equicorrelation(n0);
                    for (tag, rho) in [("min", lo), ("half", lo / 2.0)] {
                        for (s, sided) in [("one", Sidedness::One), ("two", Sidedness::Two)] {
                            out.push(Member::GlobalNull(
                                format!("n0={n0} rho={tag} {s}-sided"),
                                equi(n0, rho, sided),
                            ));
                        }
                    }
                }
                out
            }
            ConsistencyClass::VanishingNullProportion => {
                let mut out = Vec::new();
                for l in [10usize, 100, 1000] {
                    let (n, n0) = vanishing_null_family(l, VanishingSchedule::default());
                    let n1 = n - n0;
                    out.push(Member::WithNonNulls(
                        format!("n={n} n0={n0} iid"),
                        GeneratorSpec::IidUniform { n0, n1, mu_alt: 2.0 },
                        AdversarySpec::Informed,
                    ));
                    let mut sizes = vec![n0];
                    sizes.extend(std::iter::repeat_n(1, n1));
                    out.push(Member::WithNonNulls(
                        format!("n={n} n0={n0} identical"),
                        GeneratorSpec::BlockDependent {
                            block_sizes: sizes,
                            max_block: n0,
                            within: WithinBlock::Identical,
                            n0,
                            mu_alt: 2.0,
                        },
                        AdversarySpec::Informed,
                    ));
                }
                out
            }
            ConsistencyClass::TwoSided => {
                let mut out = Vec::new();
                for n in [10usize, 100] {
                    for rho in [0.0, 0.5, 0.9] {
                        out.push(Member::GlobalNull(
                            format!("n={n} rho={rho}"),
                            GeneratorSpec::TwoSidedWrap {
                                inner: Box::new(equi(n, rho, Sidedness::One)),
                            },
                        ));
                    }
                }
                out
            }
            ConsistencyClass::Block => {
                let mut out = Vec::new();
                for n in [30usize, 300] {
                    for (tag, within) in [
                        ("identical", WithinBlock::Identical),
                        ("rho=0.5", WithinBlock::Equicorrelated { rho: 0.5 }),
                    ] {
                        out.push(Member::GlobalNull(
                            format!("n={n} {tag}"),
                            GeneratorSpec::BlockDependent {
                                block_sizes: vec![3; n / 3],
                                max_block: 3,
                                within,
                                n0: n,
                                mu_alt: 2.0,
                            },
                        ));
                    }
                }
                out
            }
            ConsistencyClass::GuoRao => [100u64, 10_000, 1_000_000, 100_000_000]
                .into_iter()
                .map(|n| Member::ClosedForm(format!("n={n}"), n))
                .collect(),
        }
    }
}

enum Member {
    /// No non-nulls: BH's FDR at `alpha` is `P(Simes <= alpha)`, so one set
    /// of Simes samples serves every level.
    GlobalNull(String, GeneratorSpec),
    WithNonNulls(String, GeneratorSpec, AdversarySpec),
    ClosedForm(String, u64),
}

impl Member {
    fn label(&self) -> &str {
        match self {
            Member::GlobalNull(l, _) | Member::WithNonNulls(l, _, _) | Member::ClosedForm(l, _) => l,
        }
    }

    /// `(mean, stderr)` of BH's FDR at every level.
    fn curve(&self, alphas: &[f64], cfg: &McConfig) -> Result<Vec<(f64, f64)>> {
        match self {
            Member::GlobalNull(_, g) => {
                let xs = simes_samples(g, cfg)?;
                Ok(alphas
                    .iter()
                    .map(|&a| {
                        let hits: Vec<f64> = xs.iter().map(|&s| if s <= a { 1.0 } else { 0.0 }).collect();
                        let e = McEstimate::from_values(&hits, cfg.master_seed);
                        (e.mean, e.stderr)
                    })
                    .collect())
            }
            Member::WithNonNulls(_, g, adv) => alphas
                .iter()
                .map(|&a| {
                    let e = estimate_fdr(g, Some(*adv), Procedure::StepUp, a, cfg)?;
                    Ok((e.mean, e.stderr))
                })
                .collect(),
            Member::ClosedForm(_, n) => {
                let s = harmonic(*n)?;
                Ok(alphas.iter().map(|&a| ((s * a).min(1.0), 0.0)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberCurve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Sup over sampled members of BH's estimated FDR, per level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyCurve {
    pub class: ConsistencyClass,
    /// Sorted from largest to smallest.
    pub alphas: Vec<f64>,
    /// `(mean, stderr)` of the member attaining the sup.
    pub sup: Vec<(f64, f64)>,
    pub argmax: Vec<String>,
    pub reference: Vec<Option<f64>>,
    pub members: Vec<MemberCurve>,
    /// Non-increasing as alpha decreases (up to 3 combined standard errors)
    /// and strictly lower at the smallest level than at the largest.
    pub decreasing: bool,
}

impl ConsistencyCurve {
    pub const HEADER: [&'static str; 7] =
        ["class", "alpha", "fdr_sup", "fdr_sup_stderr", "argmax_member", "reference", "decreasing"];

    pub fn rows(&self) -> Vec<Vec<Cell>> {
        (0..self.alphas.len())
            .map(|k| {
                vec![
                    self.class.name().into(),
                    self.alphas[k].into(),
                    self.sup[k].0.into(),
                    self.sup[k].1.into(),
                    self.argmax[k].as_str().into(),
                    self.reference[k].into(),
                    self.decreasing.into(),
                ]
            })
            .collect()
    }

    pub fn series(&self) -> Series {
        let mut s = Series::new(&format!("consistency_{}", self.class.name()), "alpha", "FDR", true);
        for m in &self.members {
            s = s.line(m.label.clone(), m.points.clone());
        }
        s = s.line("sup", self.alphas.iter().zip(&self.sup).map(|(&a, &(m, _))| (a, m)).collect());
        let reference: Vec<(f64, f64)> = self
            .alphas
            .iter()
            .zip(&self.reference)
            .filter_map(|(&a, r)| r.map(|r| (a, r)))
            .collect();
        if !reference.is_empty() {
            s = s.line("reference", reference);
        }
        s
    }
}

pub fn consistency_curve(class: ConsistencyClass, alpha_grid: &[f64], cfg: &McConfig) -> Result<ConsistencyCurve> {
    if alpha_grid.is_empty() {
        return Err(FdrError::Empty("alpha grid").into());
    }
    if let Some(&a) = alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(FdrError::InvalidAlpha(a).into());
    }
    let mut alphas = alpha_grid.to_vec();
    alphas.sort_by(|a, b| b.total_cmp(a));
    alphas.dedup();
    let members = class.members();
    let mut estimates = Vec::with_capacity(members.len());
    for (k, m) in members.iter().enumerate() {
        let sub = McConfig {
            master_seed: replication_seed(cfg.master_seed, k as u64),
            ..*cfg
        };
        estimates.push(m.curve(&alphas, &sub)?);
    }
    let mut sup = Vec::with_capacity(alphas.len());
    let mut argmax = Vec::with_capacity(alphas.len());
    let mut reference = Vec::with_capacity(alphas.len());
    for (i, &a) in alphas.iter().enumerate() {
        let (best, est) = estimates
            .iter()
            .enumerate()
            .map(|(k, e)| (k, e[i]))
            .fold((0, (f64::NEG_INFINITY, 0.0)), |acc, cur| if cur.1 .0 > acc.1 .0 { cur } else { acc });
        sup.push(est);
        argmax.push(members[best].label().to_string());
        reference.push(class.reference(a, &members)?);
    }
    let non_increasing = sup.windows(2).all(|w| {
        let slack = 3.0 * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt();
        w[1].0 <= w[0].0 + slack
    });
    let decreasing = non_increasing && sup.last().expect("non-empty").0 < sup[0].0;
    let members = members
        .iter()
        .zip(&estimates)
        .map(|(m, e)| MemberCurve {
            label: m.label().to_string(),
            points: alphas.iter().zip(e).map(|(&a, &(v, _))| (a, v)).collect(),
        })
        .collect();
    Ok(ConsistencyCurve {
        class,
        alphas,
        sup,
        argmax,
        reference,
        members,
        decreasing,
    })
}

pub const STRUCTURE_HEADER: [&str; 8] =
    ["matrix", "n", "n0", "prdn", "prds", "mtp2_feasible", "signs", "max_violation"];

/// PRDN/PRDS checks on `sigma` and the MTP2 sign search on its null block.
pub fn structure_row(name: &str, sigma: &DMatrix<f64>, null_idx: &[usize]) -> Result<Vec<Cell>> {
    validate_correlation(sigma)?;
    if null_idx.is_empty() {
        return Err(FdrError::Empty("null index set").into());
    }
    let prdn = prdn_check_gaussian(sigma, null_idx)?;
    let prds = prds_check_gaussian(sigma, null_idx)?;
    let sigma0 = sigma.select_rows(null_idx).select_columns(null_idx);
    let (feasible, signs, violation) = match mtp2_sign_check(&sigma0)? {
        Some(b) => {
            let k = negative_precision(&sigma0)?;
            let signs: String = b.signs().iter().map(|&s| if s > 0 { '+' } else { '-' }).collect();
            (true, Cell::Text(signs), Cell::Num(b.violation(&k)))
        }
        None => (false, Cell::Missing, Cell::Missing),
    };
    Ok(vec![
        name.into(),
        sigma.nrows().into(),
        null_idx.len().into(),
        prdn.into(),
        prds.into(),
        feasible.into(),
        signs,
        violation,
    ])
}
