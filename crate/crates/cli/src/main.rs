use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdrlink_cli::config::SEED_ENV;
use fdrlink_cli::output::{write_all, Table};
use fdrlink_cli::tables::{bounds_table, structure_row, BoundsParams, STRUCTURE_HEADER};
use fdrlink_cli::{CliError, ExperimentConfig, RunOverrides};
use fdrlink_core::dependence::parse_dense_matrix;

#[derive(Parser)]
#[command(name = "fdrlink", version, about = "FDR bounds and Monte Carlo experiments for compliant procedures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset (E1..E8) or a JSON experiment config.
    Run(RunArgs),
    /// Print closed-form bounds as CSV.
    Bounds(BoundsArgs),
    /// PRDN, PRDS and MTP2 checks on a correlation matrix file.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Preset name or path to a config file.
    target: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render each plot series as SVG.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    n0: u64,
    /// Defaults to n0 / n.
    #[arg(long)]
    pi0: Option<f64>,
    #[arg(long, num_args = 1.., required = true)]
    alpha: Vec<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Whitespace-separated rows; `#` starts a comment line.
    matrix: PathBuf,
    /// Comma-separated null indices (0-based). Defaults to all.
    #[arg(long, value_delimiter = ',')]
    nulls: Option<Vec<usize>>,
}

fn emit(table: &Table, out: Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(".".as_ref());
            let name = path
                .file_name()
                .ok_or_else(|| CliError::MalformedConfig(format!("{} is not a file path", path.display())))?;
            write_all(dir, &[(name.to_string_lossy().into_owned(), table.to_csv())])?;
        }
        None => {
            std::io::stdout()
                .write_all(&table.to_csv())
                .map_err(|e| CliError::Output {
                    path: "<stdout>".into(),
                    source: e,
                })?;
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => {
            let cfg = ExperimentConfig::from_arg(&a.target)?;
            let over = RunOverrides {
                seed: a.seed,
                reps: a.reps,
                out_dir: a.out,
                svg: a.svg,
            };
            let env_seed = std::env::var(SEED_ENV).ok();
            let (plan, written) = fdrlink_cli::run(&cfg, &over, env_seed.as_deref())?;
            if plan.uses_mc() {
                eprint!("seed {} reps {}: ", plan.master_seed, plan.reps);
            }
            eprintln!("wrote {} files to {}", written.len(), plan.out_dir.display());
            Ok(())
        }
        Command::Bounds(a) => {
            let t = bounds_table(&BoundsParams {
                n: a.n,
                n0: a.n0,
                pi0: a.pi0,
                alphas: a.alpha,
                gamma: a.gamma,
            })?;
            emit(&t, a.out)
        }
        Command::Check(a) => {
            let text = std::fs::read_to_string(&a.matrix).map_err(|source| CliError::Input {
                path: a.matrix.clone(),
                source,
            })?;
            let malformed = |e: fdrlink_core::FdrError| CliError::MalformedConfig(format!("{}: {e}", a.matrix.display()));
            let sigma = parse_dense_matrix(&text).map_err(malformed)?;
            let nulls = a.nulls.unwrap_or_else(|| (0..sigma.nrows()).collect());
            let name = a.matrix.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let row = structure_row(&name, &sigma, &nulls).map_err(|e| match e {
                CliError::Core(c) => malformed(c),
                other => other,
            })?;
            let mut t = Table::new("structure", &STRUCTURE_HEADER);
            t.push(row);
            emit(&t, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fdrlink: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
