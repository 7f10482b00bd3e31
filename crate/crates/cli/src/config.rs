//! Experiment configuration file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pdcl::agents::{Algorithm, TrainConfig};
use pdcl::fixtures::historical_scheme;
use pdcl::{default_scenario, load_scenario, ScenarioConfig, SchedulingScheme};
use serde::{Deserialize, Serialize};

use crate::ScenarioSel;

/// Contents of the `--config` file. Every field is optional; relative paths
/// are resolved against the file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Size of the built-in scenario when no scenario file is given.
    pub tasks: usize,
    /// Scenario file (TOML).
    pub scenario: Option<PathBuf>,
    /// Historical scheme (CSV) for the pattern reward. Defaults to the
    /// built-in reference for the scenario.
    pub historical: Option<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tasks: 10,
            scenario: None,
            historical: None,
            algorithms: Algorithm::ALL.to_vec(),
            alphas: vec![0.0, 0.1],
            seeds: vec![0],
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.scenario, &mut cfg.historical].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks == 0 {
            bail!("tasks must be at least 1");
        }
        if let Some(a) = self.alphas.iter().find(|a| !a.is_finite() || **a < 0.0) {
            bail!("alpha {a} must be finite and non-negative");
        }
        self.train.validate().map_err(anyhow::Error::msg)
    }

    /// The scenario chosen by command-line flags, falling back to the file.
    pub fn scenario(&self, sel: &ScenarioSel) -> Result<ScenarioConfig> {
        if let Some(path) = sel.scenario.as_ref().or(self.scenario.as_ref()).filter(|_| sel.tasks.is_none()) {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return load_scenario(&text).with_context(|| format!("loading {}", path.display()));
        }
        let n = sel.tasks.unwrap_or(self.tasks);
        if n == 0 {
            bail!("--tasks must be at least 1");
        }
        Ok(default_scenario(n))
    }

    pub fn historical(&self, scenario: &ScenarioConfig) -> Result<SchedulingScheme> {
        match &self.historical {
            Some(path) => crate::read_scheme(path),
            None => Ok(historical_scheme(scenario)),
        }
    }
}
