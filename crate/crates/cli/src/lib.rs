//! Experiment runner for the `fdrlink` binary: presets, JSON configs,
//! tables and plot data.

pub mod config;
mod error;
pub mod experiments;
pub mod output;
pub mod tables;

use std::path::PathBuf;

pub use config::{ExperimentConfig, Plan, Preset, RunOverrides};
pub use error::{CliError, Result};
pub use output::{Report, Series, Table};

/// Resolves `cfg`, runs it and writes every output file into the plan's
/// directory. Nothing is written unless the whole run succeeds.
pub fn run(cfg: &ExperimentConfig, over: &RunOverrides, env_seed: Option<&str>) -> Result<(Plan, Vec<PathBuf>)> {
    let plan = Plan::resolve(cfg, over, env_seed)?;
    output::ensure_writable(&plan.out_dir)?;
    let report = experiments::run_plan(&plan)?;
    let files = report.files(plan.svg, Some(&plan.manifest()));
    let written = output::write_all(&plan.out_dir, &files)?;
    Ok((plan, written))
}
