use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fdrlink_core::{AdversarySpec, GeneratorSpec, Procedure};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 20240601;
pub const SEED_ENV: &str = "FDRLINK_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::E1,
        Preset::E2,
        Preset::E3,
        Preset::E4,
        Preset::E5,
        Preset::E6,
        Preset::E7,
        Preset::E8,
    ];

    pub fn description(self) -> &'static str {
        match self {
            Preset::E1 => "PRDN envelope under the informed adversary",
            Preset::E2 => "lower-bound tightness against D_alpha",
            Preset::E3 => "Bonferroni-masked adversaries",
            Preset::E4 => "arbitrary-dependence bound against the log correction",
            Preset::E5 => "FDR-consistency curves",
            Preset::E6 => "FDR-linking slack",
            Preset::E7 => "FDX bound",
            Preset::E8 => "structural checks on built-in covariance matrices",
        }
    }

    /// Replications per Monte Carlo estimate when the config leaves `reps` out.
    pub fn default_reps(self) -> usize {
        match self {
            Preset::E5 => 20_000,
            Preset::E4 | Preset::E8 => 0,
            _ => 100_000,
        }
    }

    pub fn uses_mc(self) -> bool {
        !matches!(self, Preset::E4 | Preset::E8)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| CliError::UnknownPreset(s.to_string()))
    }
}

/// A run description: either a preset name or an explicit experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversarySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub procedure: Option<Procedure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub svg: bool,
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            preset: Some(p),
            generator: None,
            adversary: None,
            procedure: None,
            alpha_grid: Vec::new(),
            gamma_grid: Vec::new(),
            reps: None,
            master_seed: None,
            workers: None,
            out_dir: None,
            svg: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::MalformedConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Input {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// A preset name, or a path to a JSON config when the argument is not one.
    pub fn from_arg(arg: &str) -> Result<Self> {
        if let Ok(p) = arg.parse::<Preset>() {
            return Ok(Self::preset(p));
        }
        let path = Path::new(arg);
        if path.extension().is_some_and(|e| e == "json") || path.exists() {
            return Self::from_path(path);
        }
        Err(CliError::UnknownPreset(arg.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::MalformedConfig(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.reps == Some(0) {
            return bad("reps must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        match (&self.preset, &self.generator) {
            (Some(_), None) => {
                if self.adversary.is_some()
                    || self.procedure.is_some()
                    || !self.alpha_grid.is_empty()
                    || !self.gamma_grid.is_empty()
                {
                    return bad(
                        "a preset config only takes reps, master_seed, workers, out_dir and svg".into(),
                    );
                }
            }
            (Some(_), Some(_)) => return bad("give either `preset` or `generator`, not both".into()),
            (None, None) => return bad("need `preset` or `generator`".into()),
            (None, Some(g)) => {
                g.validate().map_err(|e| CliError::MalformedConfig(format!("generator: {e}")))?;
                if self.alpha_grid.is_empty() {
                    return bad("alpha_grid is empty".into());
                }
                if let Some(a) = self.alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
                    return bad(format!("alpha {a} is outside (0, 1)"));
                }
                if let Some(g) = self.gamma_grid.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
                    return bad(format!("gamma {g} is outside (0, 1)"));
                }
            }
        }
        Ok(())
    }
}

/// Command-line overrides for `run`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Custom {
    pub generator: GeneratorSpec,
    pub adversary: Option<AdversarySpec>,
    pub procedure: Procedure,
    pub alpha_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Preset(Preset),
    Custom(Custom),
}

/// A config with every default and override applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub experiment: Experiment,
    pub reps: usize,
    pub master_seed: u64,
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
    pub svg: bool,
}

impl Plan {
    /// Seed precedence: `--seed`, then `FDRLINK_SEED`, then the config, then
    /// the built-in default.
    pub fn resolve(cfg: &ExperimentConfig, over: &RunOverrides, env_seed: Option<&str>) -> Result<Self> {
        cfg.validate()?;
        let env_seed = env_seed
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::MalformedConfig(format!("{SEED_ENV}={s:?} is not a u64")))
            })
            .transpose()?;
        let master_seed = over
            .seed
            .or(env_seed)
            .or(cfg.master_seed)
            .unwrap_or(DEFAULT_SEED);
        if over.reps == Some(0) {
            return Err(CliError::MalformedConfig("reps must be positive".into()));
        }
        let (experiment, default_reps, stem) = match (&cfg.preset, &cfg.generator) {
            (Some(p), _) => (Experiment::Preset(*p), p.default_reps(), p.to_string()),
            (None, Some(g)) => (
                Experiment::Custom(Custom {
                    generator: g.clone(),
                    adversary: cfg.adversary,
                    procedure: cfg.procedure.unwrap_or(Procedure::StepUp),
                    alpha_grid: cfg.alpha_grid.clone(),
                    gamma_grid: cfg.gamma_grid.clone(),
                }),
                100_000,
                "custom".to_string(),
            ),
            (None, None) => unreachable!("validated"),
        };
        Ok(Plan {
            experiment,
            reps: over.reps.or(cfg.reps).unwrap_or(default_reps),
            master_seed,
            workers: cfg.workers,
            out_dir: over
                .out_dir
                .clone()
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| Path::new("fdrlink-out").join(stem)),
            svg: over.svg || cfg.svg,
        })
    }

    pub fn uses_mc(&self) -> bool {
        match &self.experiment {
            Experiment::Preset(p) => p.uses_mc(),
            Experiment::Custom(_) => true,
        }
    }

    /// JSON echo of the resolved plan, written next to the outputs.
    pub fn manifest(&self) -> String {
        let mut v = serde_json::to_value(self).expect("plan serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.insert("schema_version".into(), SCHEMA_VERSION.into());
            obj.remove("out_dir");
            if !self.uses_mc() {
                obj.insert("reps".into(), serde_json::Value::Null);
            }
        }
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }
}
