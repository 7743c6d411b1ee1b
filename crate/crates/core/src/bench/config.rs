//! Experiment configuration: a TOML file with an `[experiment]` table and an
//! optional `[problem]` table, overridable field by field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{NestorError, Result};
use crate::problem::EstimatorMode;
use crate::problems::{problem_by_id, ProblemParams};
use crate::qamc::QamcConfig;
use crate::schedule::DEFAULT_DELTA;

/// Per-invocation classical step estimate above which a run is refused.
pub const GUARDRAIL_STEPS: f64 = 1e9;

pub const DEFAULT_REPS: u64 = 30;

/// Four points, ratio 2.
pub fn default_eps_grid() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem_id: String,
    pub estimator: EstimatorMode,
    pub eps_grid: Vec<f64>,
    pub reps: u64,
    pub delta: f64,
    pub seed: u64,
    pub kappa: f64,
    pub min_charge: u64,
    pub output_dir: PathBuf,
    /// Run even when the cost pre-pass exceeds [`GUARDRAIL_STEPS`].
    pub allow_expensive: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub problem: ProblemParams,
}

impl ExperimentConfig {
    pub fn new(problem_id: impl Into<String>, estimator: EstimatorMode) -> Self {
        ExperimentConfig {
            problem_id: problem_id.into(),
            estimator,
            eps_grid: default_eps_grid(),
            reps: DEFAULT_REPS,
            delta: DEFAULT_DELTA,
            seed: 0,
            kappa: 1.0,
            min_charge: 1,
            output_dir: PathBuf::from("."),
            allow_expensive: false,
            threads: None,
            problem: ProblemParams::default(),
        }
    }

    pub fn qamc(&self) -> Result<QamcConfig> {
        QamcConfig::new(self.kappa, self.min_charge)
    }

    pub fn validate(&self) -> Result<()> {
        problem_by_id(&self.problem_id, &self.problem)?;
        if self.eps_grid.is_empty() {
            return Err(NestorError::Config("eps grid is empty".into()));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(NestorError::Config(format!("eps {e} is outside (0, 1)")));
        }
        if self.eps_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(NestorError::Config(
                "eps grid must be strictly decreasing".into(),
            ));
        }
        if self.reps == 0 {
            return Err(NestorError::Config("reps must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(NestorError::Config(format!(
                "delta {} is outside (0, 1/2]",
                self.delta
            )));
        }
        if self.threads == Some(0) {
            return Err(NestorError::Config("threads must be at least 1".into()));
        }
        self.qamc()
            .map_err(|e| NestorError::Config(e.to_string()))?;
        Ok(())
    }

    /// Parses a config file body. Missing fields fall back to defaults except
    /// the problem and estimator, which must come from the file or overrides.
    pub fn from_toml_str(text: &str) -> Result<PartialConfig> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| NestorError::Config(e.to_string()))?;
        let mut partial = file.experiment.unwrap_or_default();
        partial.problem = file.problem;
        Ok(partial)
    }

    pub fn from_file(path: &Path) -> Result<PartialConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| NestorError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<PartialConfig>,
    problem: Option<ProblemParams>,
}

/// Every field optional; used both for the file and for command-line
/// overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    #[serde(alias = "problem")]
    pub problem_id: Option<String>,
    pub estimator: Option<String>,
    #[serde(alias = "eps")]
    pub eps_grid: Option<Vec<f64>>,
    pub reps: Option<u64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub kappa: Option<f64>,
    pub min_charge: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub allow_expensive: Option<bool>,
    pub threads: Option<usize>,
    #[serde(skip)]
    pub problem: Option<ProblemParams>,
}

impl PartialConfig {
    /// Fields set in `over` win.
    pub fn overlay(mut self, over: PartialConfig) -> PartialConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            problem_id,
            estimator,
            eps_grid,
            reps,
            delta,
            seed,
            kappa,
            min_charge,
            output_dir,
            allow_expensive,
            threads,
            problem
        );
        self
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let problem_id = self
            .problem_id
            .ok_or_else(|| NestorError::Config("no problem given".into()))?;
        let estimator: EstimatorMode = self
            .estimator
            .ok_or_else(|| NestorError::Config("no estimator given".into()))?
            .parse()?;
        let mut cfg = ExperimentConfig::new(problem_id, estimator);
        if let Some(v) = self.eps_grid {
            cfg.eps_grid = v;
        }
        if let Some(v) = self.reps {
            cfg.reps = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.kappa {
            cfg.kappa = v;
        }
        if let Some(v) = self.min_charge {
            cfg.min_charge = v;
        }
        if let Some(v) = self.output_dir {
            cfg.output_dir = v;
        }
        if let Some(v) = self.allow_expensive {
            cfg.allow_expensive = v;
        }
        cfg.threads = self.threads;
        if let Some(p) = self.problem {
            cfg.problem = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
