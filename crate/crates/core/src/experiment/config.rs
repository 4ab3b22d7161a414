use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::solvers::{MomentumRule, SolverKind};

/// Keys accepted in experiment config files and as `--set key=value`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("preset", "problem preset name (see `presets`)"),
    (
        "solvers",
        "comma-separated: pgd, fista, apg-mu[:mu], apg-es[:mu], adapt-apg, adapt-apg-v2, restart[:gamma]",
    ),
    ("gamma", "comma-separated restart decay rates for bare `restart` (default 1)"),
    ("max_iters", "iteration cap per solver (default 1000)"),
    ("gap_tol", "stop a solver once f(y_k) - f* <= gap_tol"),
    ("out_dir", "output directory (default out)"),
    ("seed", "seed for generated problems (default 0)"),
    ("reference_tol", "reduced-gradient tolerance of the reference run (default 1e-9)"),
    ("data_dir", "directory holding LIBSVM dataset files"),
    ("synthetic_fallback", "true to generate stand-ins for missing datasets"),
    ("standardize", "standardize dataset features (default true)"),
    ("momentum", "fista t-update: as-listed (default) or classical"),
    ("record_every", "keep every n-th iteration in the CSV (default 1)"),
    ("record_time", "fill the wall_ns column (default false)"),
    ("execution", "parallel (default) or sequential solver runs"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub solvers: Vec<String>,
    pub gammas: Vec<f64>,
    pub max_iters: usize,
    pub gap_tol: Option<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub reference_tol: f64,
    pub data_dir: Option<PathBuf>,
    pub synthetic_fallback: bool,
    pub standardize: bool,
    pub momentum: MomentumRule,
    pub record_every: usize,
    pub record_time: bool,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: None,
            solvers: Vec::new(),
            gammas: vec![1.0],
            max_iters: 1000,
            gap_tol: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            reference_tol: 1e-9,
            data_dir: None,
            synthetic_fallback: false,
            standardize: true,
            momentum: MomentumRule::AsListed,
            record_every: 1,
            record_time: false,
            execution: Execution::Parallel,
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preset" => self.preset = Some(value.to_string()),
            "solvers" => self.solvers = list(value).map(String::from).collect(),
            "gamma" => self.gammas = list(value).map(|g| number(key, g)).collect::<Result<_>>()?,
            "max_iters" => self.max_iters = number(key, value)?,
            "gap_tol" => self.gap_tol = Some(number(key, value)?),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = number(key, value)?,
            "reference_tol" => self.reference_tol = number(key, value)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "synthetic_fallback" => self.synthetic_fallback = boolean(key, value)?,
            "standardize" => self.standardize = boolean(key, value)?,
            "momentum" => {
                self.momentum = match value {
                    "as-listed" => MomentumRule::AsListed,
                    "classical" => MomentumRule::Classical,
                    _ => {
                        return Err(Error::Config(format!(
                            "momentum: expected as-listed or classical, got {value:?}"
                        )))
                    }
                }
            }
            "record_every" => self.record_every = number(key, value)?,
            "record_time" => self.record_time = boolean(key, value)?,
            "execution" => {
                self.execution = match value {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => {
                        return Err(Error::Config(format!(
                            "execution: expected parallel or sequential, got {value:?}"
                        )))
                    }
                }
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Solver list with bare `restart` expanded over `gammas`.
    pub fn solver_kinds(&self) -> Result<Vec<SolverKind>> {
        let mut kinds = Vec::new();
        for s in &self.solvers {
            if s.trim() == "restart" {
                kinds.extend(
                    self.gammas
                        .iter()
                        .map(|&gamma| SolverKind::Restart { gamma }),
                );
            } else {
                kinds.push(SolverKind::parse(s)?);
            }
        }
        Ok(kinds)
    }

    pub fn validate(&self) -> Result<Vec<SolverKind>> {
        if self.preset.is_none() {
            return Err(Error::Config("no preset given".into()));
        }
        let kinds = self.solver_kinds()?;
        if kinds.is_empty() {
            return Err(Error::Config("at least one solver is required".into()));
        }
        let mut names: Vec<String> = kinds.iter().map(SolverKind::name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("solver {} listed twice", w[0])));
        }
        if self.gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Config("restart gamma must be positive".into()));
        }
        if !(self.reference_tol > 0.0) {
            return Err(Error::Config("reference_tol must be positive".into()));
        }
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(Error::Config(
                "max_iters and record_every must be positive".into(),
            ));
        }
        Ok(kinds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_config_with_overrides() {
        let text = "# demo\npreset = spectral\nsolvers = pgd, fista, restart\ngamma = 0.5, 2\nmax_iters = 50 # short\n";
        let mut cfg = ExperimentConfig::parse(text).unwrap();
        cfg.set("seed", "7").unwrap();
        assert_eq!(cfg.preset.as_deref(), Some("spectral"));
        assert_eq!(cfg.max_iters, 50);
        assert_eq!(cfg.seed, 7);
        let kinds = cfg.validate().unwrap();
        assert_eq!(kinds.len(), 4);
        assert_eq!(kinds[3], SolverKind::Restart { gamma: 2.0 });
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("nonsense").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("max_iters = many").is_err());
        let cfg = ExperimentConfig::parse("preset = spectral").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("preset = spectral\nsolvers = pgd, pgd").unwrap();
        assert!(cfg.validate().is_err());
        let cfg =
            ExperimentConfig::parse("preset = spectral\nsolvers = pgd\nreference_tol = 0").unwrap();
        assert!(cfg.validate().is_err());
    }
}
