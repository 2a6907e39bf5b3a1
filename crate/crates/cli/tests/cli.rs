use std::path::Path;
use std::process::{Command, Output};

use fdrlink_cli::tables::{consistency_curve, ConsistencyClass};
use fdrlink_core::mc::McConfig;

fn fdrlink(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fdrlink"));
    cmd.args(args).env_remove("FDRLINK_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn fdrlink")
}

fn run_ok(args: &[&str]) {
    let out = fdrlink(args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn e1_passes_on_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e1");
    run_ok(&["run", "E1", "--reps", "4000", "--out", out.to_str().unwrap()]);
    let (header, rows) = read_csv(&out.join("prdn_envelope.csv"));
    assert_eq!(header, ["alpha", "fdr_mean", "fdr_stderr", "prdn_bound", "pass"]);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r[4], "true", "{r:?}");
    }
    assert!(out.join("prdn_envelope.tsv").exists());
    assert!(out.join("manifest.json").exists());
    assert!(!out.join("prdn_envelope.svg").exists());
}

#[test]
fn e4_new_bound_wins_inside_range() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["run", "e4", "--out", dir.path().to_str().unwrap(), "--svg"]);
    let (h, rows) = read_csv(&dir.path().join("improvement.csv"));
    let (inside, new, old) = (col(&h, "in_range"), col(&h, "bound_new"), col(&h, "bound_log"));
    let mut checked = 0;
    for r in &rows {
        if r[inside] == "true" {
            let (a, b): (f64, f64) = (r[new].parse().unwrap(), r[old].parse().unwrap());
            assert!(a < b, "{r:?}");
            checked += 1;
        }
    }
    assert_eq!(checked, 60);
    let svg = std::fs::read_to_string(dir.path().join("improvement_n200_n0100.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let out = dir.path().join("out");
    for text in [
        r#"{"schema_version": 1, "preset": "E1", "unexpected": true}"#,
        r#"{"schema_version": 1, "generator": {"kind": "iid_uniform", "n0": 5, "n1": 5}, "alpha_grid": [0.0]}"#,
        "not json",
    ] {
        std::fs::write(&cfg, text).unwrap();
        let o = fdrlink(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(3), "{text}");
        assert!(!out.exists());
    }
}

#[test]
fn distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fdrlink(&["run", "E42"], &[]).status.code(), Some(2));
    // A regular file where the output directory should go.
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = fdrlink(&["run", "E4", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(4));
    let o = fdrlink(&["run", "E1", "--reps", "10"], &[("FDRLINK_SEED", "abc")]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(fdrlink(&["frobnicate"], &[]).status.code(), Some(64));
}

#[test]
fn outputs_are_byte_identical_for_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, envs: &[(&str, &str)]| {
        let out = dir.path().join(name);
        let o = fdrlink(&["run", "E7", "--reps", "1500", "--out", out.to_str().unwrap()], envs);
        assert!(o.status.success());
        std::fs::read(out.join("fdx.csv")).unwrap()
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    assert_eq!(a, b);
    let c = run("c", &[("FDRLINK_SEED", "7")]);
    assert_ne!(a, c);
    let d = run("d", &[("FDRLINK_SEED", "7")]);
    assert_eq!(c, d);
}

#[test]
fn custom_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            r#"{{
                "schema_version": 1,
                "generator": {{"kind": "equicorrelated_normal", "n": 60, "n0": 20, "rho": 0.3}},
                "adversary": "Informed",
                "alpha_grid": [0.05, 0.2],
                "gamma_grid": [0.25],
                "reps": 3000,
                "out_dir": {:?}
            }}"#,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    run_ok(&["run", cfg.to_str().unwrap()]);
    let (h, rows) = read_csv(&out.join("fdr.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[col(&h, "pass")] == "true"));
    let (h, rows) = read_csv(&out.join("fdx.csv"));
    assert_eq!(h, ["alpha", "gamma", "fdx_mean", "fdx_stderr", "fdx_bound", "pass"]);
    assert_eq!(rows.len(), 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["reps"], 3000);
}

#[test]
fn remaining_presets_complete_at_small_reps() {
    let dir = tempfile::tempdir().unwrap();
    for (preset, reps, files) in [
        ("E2", "300", &["tightness.csv", "tightness.tsv"][..]),
        ("E3", "300", &["masked.csv", "masked_constants.csv"]),
        ("E5", "300", &["consistency.csv", "consistency_members.csv", "consistency_guo_rao.tsv"]),
        ("E6", "300", &["linking.csv"]),
        ("E8", "1", &["structure.csv"]),
    ] {
        let out = dir.path().join(preset);
        run_ok(&["run", preset, "--reps", reps, "--out", out.to_str().unwrap()]);
        for f in files {
            assert!(out.join(f).exists(), "{preset}: {f}");
        }
    }
    let (h, rows) = read_csv(&dir.path().join("E8").join("structure.csv"));
    let find = |name: &str| rows.iter().find(|r| r[0] == name).unwrap().clone();
    let ar = find("ar1_rho_-0.6");
    assert_eq!(ar[col(&h, "prdn")], "false");
    assert_eq!(ar[col(&h, "signs")], "+-+-+");
    let mixed = find("negative_null_non_null");
    assert_eq!((mixed[col(&h, "prdn")].as_str(), mixed[col(&h, "prds")].as_str()), ("true", "false"));
    assert_eq!(find("equicorrelated_rho_-0.2")[col(&h, "mtp2_feasible")], "false");

    let (h, rows) = read_csv(&dir.path().join("E5").join("consistency.csv"));
    assert_eq!(rows.len(), 5 * 8);
    let guo = rows.iter().filter(|r| r[0] == "guo_rao").count();
    assert_eq!(guo, 8);
    assert!(h.contains(&"decreasing".to_string()));
}

#[test]
fn bounds_and_check_subcommands() {
    let o = fdrlink(&["bounds", "--n", "200", "--n0", "100", "--alpha", "0.05", "0.36", "--gamma", "0.2"], &[]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "bound_name,n,n0,pi0,alpha,gamma,value,clamped_flag");
    assert_eq!(lines.count(), 10);
    assert!(text.contains("prdn,,,0.5,0.050000000000000003,,"));

    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("sigma.txt");
    std::fs::write(&m, "# AR(1), rho = -0.5\n1 -0.5 0.25\n-0.5 1 -0.5\n0.25 -0.5 1\n").unwrap();
    let o = fdrlink(&["check", m.to_str().unwrap()], &[]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..7], ["sigma", "3", "3", "false", "false", "true", "+-+"]);
    let o = fdrlink(&["check", m.to_str().unwrap(), "--nulls", "0,2"], &[]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("sigma,3,2,true,false,true,++"));

    std::fs::write(&m, "1 2\n3\n").unwrap();
    assert_eq!(fdrlink(&["check", m.to_str().unwrap()], &[]).status.code(), Some(3));
}

#[test]
fn two_sided_and_block_curves_respect_their_constants() {
    let alphas = [0.2, 0.1, 0.05, 0.01];
    let cfg = McConfig::new(20_000, 3);
    for (class, c) in [(ConsistencyClass::TwoSided, 2.0), (ConsistencyClass::Block, 3.0)] {
        let curve = consistency_curve(class, &alphas, &cfg).unwrap();
        for (k, &a) in curve.alphas.iter().enumerate() {
            let (mean, se) = curve.sup[k];
            assert!(mean <= c * a + 3.0 * se, "{class:?} alpha={a}: {mean} +- {se}");
            assert_eq!(curve.reference[k], Some(c * a));
        }
        assert!(curve.decreasing, "{class:?}");
    }
}

#[test]
fn guo_rao_reference_does_not_shrink_uniformly() {
    let curve = consistency_curve(ConsistencyClass::GuoRao, &[0.01, 0.001], &McConfig::new(1, 1)).unwrap();
    // FDR / alpha grows like log n across members at a fixed level.
    let ratios: Vec<f64> = curve.members.iter().map(|m| m.points[1].1 / 0.001).collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0] + 4.0), "{ratios:?}");
}
