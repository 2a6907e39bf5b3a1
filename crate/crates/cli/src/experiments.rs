//! Built-in presets and the explicit-config runner.

use fdrlink_core::adversaries::{AdversarySpec, MaskStrategy};
use fdrlink_core::bounds::{
    arbitrary_dep_bound, fdx_bound, improvement_range, log_correction_bound, prdn_bound, prdn_bound_pi0,
};
use fdrlink_core::mc::{
    estimate_d_alpha, estimate_fdr, estimate_fdx, estimate_inverse_second, estimate_masked_max, replication_seed,
    verify_linking, McConfig, Procedure,
};
use fdrlink_core::{DMatrix, GeneratorSpec, McEstimate, Sidedness, WithinBlock};

use crate::config::{Custom, Experiment, Plan, Preset};
use crate::error::Result;
use crate::output::{Report, Series, Table};
use crate::tables::{consistency_curve, structure_row, ConsistencyClass, ConsistencyCurve, STRUCTURE_HEADER};

/// MC estimate within `k` standard errors of the bound.
fn holds(e: &McEstimate, bound: f64) -> bool {
    e.mean <= bound + 3.0 * e.stderr
}

/// Independent stream for the `salt`-th estimate of a run.
fn salted(cfg: &McConfig, salt: u64) -> McConfig {
    McConfig {
        master_seed: replication_seed(cfg.master_seed, salt),
        ..*cfg
    }
}

fn iid(n0: usize, n1: usize) -> GeneratorSpec {
    GeneratorSpec::IidUniform { n0, n1, mu_alt: 2.0 }
}

fn equi(n0: usize, n1: usize, rho: f64) -> GeneratorSpec {
    GeneratorSpec::EquicorrelatedNormal {
        n: n0 + n1,
        n0,
        rho,
        sided: Sidedness::One,
        mu_alt: 2.0,
    }
}

fn adversary_name(a: Option<AdversarySpec>) -> String {
    match a {
        None => "none".into(),
        Some(AdversarySpec::Informed) => "informed".into(),
        Some(AdversarySpec::MostAntiConservative) => "most_anti_conservative".into(),
        Some(AdversarySpec::BonferroniMasked(MaskStrategy::PlugInSecond)) => "masked_plug_in_second".into(),
        Some(AdversarySpec::BonferroniMasked(MaskStrategy::ShiftedJStar)) => "masked_shifted_j_star".into(),
        Some(AdversarySpec::FixedZeros(k)) => format!("fixed_zeros_{k}"),
    }
}

fn procedure_name(p: Procedure) -> &'static str {
    match p {
        Procedure::StepUp => "step_up",
        Procedure::StepDown => "step_down",
        Procedure::MostAntiConservative => "most_anti_conservative",
    }
}

pub fn run_plan(plan: &Plan) -> Result<Report> {
    let cfg = McConfig {
        reps: plan.reps,
        master_seed: plan.master_seed,
        workers: plan.workers,
    };
    match &plan.experiment {
        Experiment::Custom(c) => custom(c, &cfg),
        Experiment::Preset(p) => run_preset(*p, &cfg),
    }
}

pub fn run_preset(p: Preset, cfg: &McConfig) -> Result<Report> {
    match p {
        Preset::E1 => e1(cfg),
        Preset::E2 => e2(cfg),
        Preset::E3 => e3(cfg),
        Preset::E4 => e4(),
        Preset::E5 => e5(cfg),
        Preset::E6 => e6(cfg),
        Preset::E7 => e7(cfg),
        Preset::E8 => e8(),
    }
}

/// Columns `alpha, fdr_mean, fdr_stderr, prdn_bound, pass`, with the PRDN
/// bound at the generator's null proportion.
fn fdr_table(
    name: &str,
    gen: &GeneratorSpec,
    adv: Option<AdversarySpec>,
    proc: Procedure,
    alphas: &[f64],
    cfg: &McConfig,
) -> Result<(Table, Series)> {
    let mut t = Table::new(name, &["alpha", "fdr_mean", "fdr_stderr", "prdn_bound", "pass"]);
    let (mut fdr, mut bound) = (Vec::new(), Vec::new());
    for (k, &a) in alphas.iter().enumerate() {
        let e = estimate_fdr(gen, adv, proc, a, &salted(cfg, k as u64))?;
        let b = prdn_bound_pi0(gen.pi0(), a)?;
        t.push(vec![a.into(), e.mean.into(), e.stderr.into(), b.into(), holds(&e, b).into()]);
        fdr.push((a, e.mean));
        bound.push((a, b));
    }
    let s = Series::new(name, "alpha", "FDR", true)
        .line("fdr_mean", fdr)
        .line("prdn_bound", bound);
    Ok((t, s))
}

fn custom(c: &Custom, cfg: &McConfig) -> Result<Report> {
    let (fdr, fdr_series) = fdr_table("fdr", &c.generator, c.adversary, c.procedure, &c.alpha_grid, cfg)?;
    let mut report = Report {
        tables: vec![fdr],
        series: vec![fdr_series],
    };
    if !c.gamma_grid.is_empty() {
        let mut t = Table::new("fdx", &["alpha", "gamma", "fdx_mean", "fdx_stderr", "fdx_bound", "pass"]);
        let pi0 = c.generator.pi0();
        for (i, &a) in c.alpha_grid.iter().enumerate() {
            for (j, &g) in c.gamma_grid.iter().enumerate() {
                let salt = 1000 + (i * c.gamma_grid.len() + j) as u64;
                let e = estimate_fdx(&c.generator, c.adversary, c.procedure, a, g, &salted(cfg, salt))?;
                let b = fdx_bound(pi0, a, g)?;
                t.push(vec![a.into(), g.into(), e.mean.into(), e.stderr.into(), b.into(), holds(&e, b).into()]);
            }
        }
        report.tables.push(t);
    }
    Ok(report)
}

const E1_ALPHAS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

fn e1_generator() -> GeneratorSpec {
    iid(1000, 10_000)
}

fn e1(cfg: &McConfig) -> Result<Report> {
    let (t, s) = fdr_table(
        "prdn_envelope",
        &e1_generator(),
        Some(AdversarySpec::Informed),
        Procedure::StepUp,
        &E1_ALPHAS,
        cfg,
    )?;
    Ok(Report {
        tables: vec![t],
        series: vec![s],
    })
}

fn e2(cfg: &McConfig) -> Result<Report> {
    let gen = e1_generator();
    let pi0 = gen.pi0();
    let mut t = Table::new(
        "tightness",
        &[
            "alpha",
            "fdr_mean",
            "fdr_stderr",
            "d_alpha_mean",
            "d_alpha_stderr",
            "d_pi0_alpha_mean",
            "d_pi0_alpha_stderr",
            "prdn_bound",
            "fdr_over_prdn_bound",
            "lower_bound_holds",
        ],
    );
    let mut lines: [Vec<(f64, f64)>; 4] = Default::default();
    for (k, a) in [0.1, 0.05, 0.01].into_iter().enumerate() {
        let k = k as u64;
        let fdr = estimate_fdr(&gen, Some(AdversarySpec::Informed), Procedure::StepUp, a, &salted(cfg, k))?;
        let d = estimate_d_alpha(a, &salted(cfg, 100 + k))?;
        let d_pi0 = estimate_d_alpha(pi0 * a, &salted(cfg, 200 + k))?;
        let b = prdn_bound(a)?;
        let se = (fdr.stderr * fdr.stderr + d.stderr * d.stderr).sqrt();
        t.push(vec![
            a.into(),
            fdr.mean.into(),
            fdr.stderr.into(),
            d.mean.into(),
            d.stderr.into(),
            d_pi0.mean.into(),
            d_pi0.stderr.into(),
            b.into(),
            (fdr.mean / b).into(),
            (fdr.mean >= d.mean - 6.0 * se).into(),
        ]);
        for (line, y) in lines.iter_mut().zip([fdr.mean, d.mean, d_pi0.mean, b]) {
            line.push((a, y));
        }
    }
    let [fdr, d, d_pi0, b] = lines;
    let s = Series::new("tightness", "alpha", "FDR", true)
        .line("fdr_mean", fdr)
        .line("d_alpha", d)
        .line("d_pi0_alpha", d_pi0)
        .line("prdn_bound", b);
    Ok(Report {
        tables: vec![t],
        series: vec![s],
    })
}

fn e3(cfg: &McConfig) -> Result<Report> {
    let mut fdr = Table::new(
        "masked",
        &["n0", "alpha", "strategy", "procedure", "fdr_mean", "fdr_stderr", "bound", "pass"],
    );
    let mut consts = Table::new(
        "masked_constants",
        &[
            "n0",
            "alpha",
            "pi0_alpha",
            "inverse_second_mean",
            "inverse_second_stderr",
            "identity_holds",
            "masked_max_mean",
            "masked_max_stderr",
            "masked_max_bound",
            "masked_max_holds",
        ],
    );
    let mut series = Series::new("masked", "alpha", "FDR / alpha", true);
    let mut salt = 0u64;
    for n0 in [10usize, 100] {
        let gen = iid(n0, 10 * n0);
        let pi0 = gen.pi0();
        let mut per_line: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for a in [0.01, 0.05, 0.1] {
            for (sname, strategy) in [
                ("plug_in_second", MaskStrategy::PlugInSecond),
                ("shifted_j_star", MaskStrategy::ShiftedJStar),
            ] {
                for proc in [Procedure::StepUp, Procedure::MostAntiConservative] {
                    salt += 1;
                    let e = estimate_fdr(
                        &gen,
                        Some(AdversarySpec::BonferroniMasked(strategy)),
                        proc,
                        a,
                        &salted(cfg, salt),
                    )?;
                    let b = 3.5 * a;
                    fdr.push(vec![
                        n0.into(),
                        a.into(),
                        sname.into(),
                        procedure_name(proc).into(),
                        e.mean.into(),
                        e.stderr.into(),
                        b.into(),
                        holds(&e, b).into(),
                    ]);
                    let label = format!("n0={n0} {sname} {}", procedure_name(proc));
                    match per_line.iter_mut().find(|(l, _)| *l == label) {
                        Some((_, pts)) => pts.push((a, e.mean / a)),
                        None => per_line.push((label, vec![(a, e.mean / a)])),
                    }
                }
            }
            salt += 1;
            let inv = estimate_inverse_second(&gen, a, &salted(cfg, salt))?;
            salt += 1;
            let mx = estimate_masked_max(&gen, a, &salted(cfg, salt))?;
            let c2 = 2.5 * pi0 * a;
            consts.push(vec![
                n0.into(),
                a.into(),
                (pi0 * a).into(),
                inv.mean.into(),
                inv.stderr.into(),
                ((inv.mean - pi0 * a).abs() <= 3.0 * inv.stderr).into(),
                mx.mean.into(),
                mx.stderr.into(),
                c2.into(),
                holds(&mx, c2).into(),
            ]);
        }
        for (label, pts) in per_line {
            series = series.line(label, pts);
        }
    }
    series = series.line("bound", vec![(0.01, 3.5), (0.1, 3.5)]);
    Ok(Report {
        tables: vec![fdr, consts],
        series: vec![series],
    })
}

const E4_PAIRS: [(u64, u64); 3] = [(200, 100), (1000, 500), (10_000, 1000)];

fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect()
}

fn e4() -> Result<Report> {
    let mut t = Table::new(
        "improvement",
        &["n", "n0", "pi0", "alpha", "in_range", "bound_new", "bound_log", "new_below_log"],
    );
    let mut series = Vec::new();
    for (n, n0) in E4_PAIRS {
        let pi0 = n0 as f64 / n as f64;
        let range = improvement_range(n, n0, pi0)?;
        let mut alphas = log_grid(1e-4, 0.9, 13);
        if let Some((lo, hi)) = range {
            alphas.extend((1..=20).map(|k| lo + (hi - lo) * k as f64 / 21.0));
        }
        alphas.sort_by(f64::total_cmp);
        for a in alphas {
            let inside = range.is_some_and(|(lo, hi)| a > lo && a < hi);
            let new = arbitrary_dep_bound(n0, pi0, a)?;
            let old = log_correction_bound(n, pi0, a)?;
            t.push(vec![
                n.into(),
                n0.into(),
                pi0.into(),
                a.into(),
                inside.into(),
                new.into(),
                old.into(),
                (new < old).into(),
            ]);
        }
        let grid = log_grid(1e-4, 0.99, 60);
        let curve = |f: &dyn Fn(f64) -> fdrlink_core::Result<f64>| -> Result<Vec<(f64, f64)>> {
            grid.iter().map(|&a| Ok((a, f(a)?))).collect()
        };
        series.push(
            Series::new(&format!("improvement_n{n}_n0{n0}"), "alpha", "FDR bound", true)
                .line("arbitrary_dependence", curve(&|a| arbitrary_dep_bound(n0, pi0, a))?)
                .line("log_correction", curve(&|a| log_correction_bound(n, pi0, a))?),
        );
    }
    Ok(Report {
        tables: vec![t],
        series,
    })
}

pub const E5_ALPHAS: [f64; 8] = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];

fn e5(cfg: &McConfig) -> Result<Report> {
    let mut t = Table::new("consistency", &ConsistencyCurve::HEADER);
    let mut members = Table::new("consistency_members", &["class", "member", "alpha", "fdr"]);
    let mut series = Vec::new();
    for (k, class) in ConsistencyClass::ALL.into_iter().enumerate() {
        let c = consistency_curve(class, &E5_ALPHAS, &salted(cfg, k as u64))?;
        for row in c.rows() {
            t.push(row);
        }
        for m in &c.members {
            for &(a, v) in &m.points {
                members.push(vec![class.name().into(), m.label.as_str().into(), a.into(), v.into()]);
            }
        }
        series.push(c.series());
    }
    Ok(Report {
        tables: vec![t, members],
        series,
    })
}

fn e6(cfg: &McConfig) -> Result<Report> {
    let (n0, n1) = (100usize, 1000usize);
    let block_n0 = 99usize;
    let gens = [
        ("iid", iid(n0, n1)),
        ("equicorrelated_rho_min", equi(n0, n1, -1.0 / (n0 as f64 - 1.0))),
        ("equicorrelated_rho_0", equi(n0, n1, 0.0)),
        ("equicorrelated_rho_0.5", equi(n0, n1, 0.5)),
        (
            "block_3_identical",
            GeneratorSpec::BlockDependent {
                block_sizes: vec![3; (block_n0 + 10 * block_n0) / 3],
                max_block: 3,
                within: WithinBlock::Identical,
                n0: block_n0,
                mu_alt: 2.0,
            },
        ),
    ];
    let advs = [
        AdversarySpec::Informed,
        AdversarySpec::FixedZeros(0),
        AdversarySpec::BonferroniMasked(MaskStrategy::PlugInSecond),
    ];
    let alpha = 0.05;
    let mut t = Table::new(
        "linking",
        &["generator", "adversary", "alpha", "lhs_mean", "lhs_stderr", "rhs", "slack", "pass"],
    );
    for (gi, (name, gen)) in gens.iter().enumerate() {
        for (ai, adv) in advs.iter().enumerate() {
            let c = verify_linking(gen, Some(*adv), alpha, &salted(cfg, (10 * gi + ai) as u64))?;
            t.push(vec![
                (*name).into(),
                adversary_name(Some(*adv)).into(),
                alpha.into(),
                c.lhs.mean.into(),
                c.lhs.stderr.into(),
                c.rhs.into(),
                c.slack.into(),
                (c.slack >= -3.0 * c.lhs.stderr).into(),
            ]);
        }
    }
    Ok(Report {
        tables: vec![t],
        series: Vec::new(),
    })
}

fn e7(cfg: &McConfig) -> Result<Report> {
    let (n0, n1) = (100usize, 1000usize);
    let gens = [
        ("iid", iid(n0, n1)),
        ("equicorrelated_rho_0.5", equi(n0, n1, 0.5)),
        (
            "block_3_rho_0.3",
            GeneratorSpec::BlockDependent {
                block_sizes: vec![3; 33],
                max_block: 3,
                within: WithinBlock::Equicorrelated { rho: 0.3 },
                n0: 33,
                mu_alt: 2.0,
            },
        ),
    ];
    let alpha = 0.05;
    let gammas = [0.1, 0.25, 0.5];
    let mut t = Table::new(
        "fdx",
        &["generator", "alpha", "gamma", "fdx_mean", "fdx_stderr", "fdx_bound", "pass"],
    );
    let mut s = Series::new("fdx", "gamma", "P(FDP >= gamma)", false);
    for (gi, (name, gen)) in gens.iter().enumerate() {
        let mut pts = Vec::new();
        let mut bounds = Vec::new();
        for g in gammas {
            // Same stream for every gamma: the exceedance events are nested.
            let e = estimate_fdx(
                gen,
                Some(AdversarySpec::Informed),
                Procedure::StepUp,
                alpha,
                g,
                &salted(cfg, gi as u64),
            )?;
            let b = fdx_bound(gen.pi0(), alpha, g)?;
            t.push(vec![
                (*name).into(),
                alpha.into(),
                g.into(),
                e.mean.into(),
                e.stderr.into(),
                b.into(),
                holds(&e, b).into(),
            ]);
            pts.push((g, e.mean));
            bounds.push((g, b));
        }
        s = s.line(*name, pts).line(format!("{name} bound"), bounds);
    }
    Ok(Report {
        tables: vec![t],
        series: vec![s],
    })
}

/// Built-in matrices for the structural checks, with their null indices.
pub fn e8_matrices() -> Vec<(&'static str, DMatrix<f64>, Vec<usize>)> {
    let equi = |n: usize, rho: f64| DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
    let ar = |n: usize, rho: f64| DMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()));
    let mixed = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.5, 0.3, -0.4, //
            0.5, 1.0, 0.2, 0.3, //
            0.3, 0.2, 1.0, 0.1, //
            -0.4, 0.3, 0.1, 1.0,
        ],
    );
    vec![
        ("equicorrelated_rho_0.4", equi(5, 0.4), (0..5).collect()),
        ("equicorrelated_rho_-0.2", equi(4, -0.2), (0..4).collect()),
        ("ar1_rho_0.6", ar(5, 0.6), (0..5).collect()),
        ("ar1_rho_-0.6", ar(5, -0.6), (0..5).collect()),
        ("negative_null_non_null", mixed, vec![0, 1, 2]),
    ]
}

fn e8() -> Result<Report> {
    let mut t = Table::new("structure", &STRUCTURE_HEADER);
    for (name, sigma, nulls) in e8_matrices() {
        t.push(structure_row(name, &sigma, &nulls)?);
    }
    Ok(Report {
        tables: vec![t],
        series: Vec::new(),
    })
}
