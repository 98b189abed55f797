use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BaiError, Result};
use crate::model::{ContextDistribution, LocationShiftBandit, SyntheticDesign};
use crate::rng::{from_seed, trial_seed};
use crate::strategies::StrategyKind;

/// A full experiment description, read from TOML.
///
/// ```toml
/// [model]
/// kind = "synthetic"
/// arms = 2
/// mu_sub = 0.8
///
/// [experiment]
/// t_max = 5000
/// checkpoints = [500, 1000, 2000, 5000]
/// n_trials = 100
///
/// [strategies]
/// names = ["rs-aipw", "uniform-eba"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub experiment: ExperimentSettings,
    #[serde(default)]
    pub strategies: StrategiesConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// The quadratic synthetic design; arm 0 is best.
    Synthetic {
        arms: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_mu_best")]
        mu_best: f64,
        mu_sub: f64,
        /// Pinned expected conditional variances, one per arm.
        #[serde(default)]
        variances: Option<Vec<f64>>,
        /// Seed for the design draws; derived from the master seed if absent.
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Context-free arms: constant conditional means and variances.
    Constant {
        means: Vec<f64>,
        variances: Vec<f64>,
        #[serde(default)]
        context: Option<ContextDistribution>,
    },
    /// A model serialized with [`LocationShiftBandit::to_toml`]. Relative
    /// paths resolve against the config file's directory.
    File { path: PathBuf },
}

fn default_dim() -> usize {
    2
}

fn default_mu_best() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSettings {
    pub t_max: usize,
    /// Budgets at which recommendations are evaluated. Defaults to `[t_max]`.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Re-run every checkpoint on a model whose suboptimal gaps equal the
    /// worst-case gap at that budget.
    #[serde(default)]
    pub worst_case_mode: bool,
    /// Worker threads; 0 uses every core, 1 runs serially.
    #[serde(default)]
    pub parallel: usize,
    /// Context draws for bound integrals and variance functionals.
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
}

fn default_trials() -> usize {
    100
}

fn default_n_mc() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategiesConfig {
    #[serde(default)]
    pub names: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| BaiError::Parse(e.to_string()))
    }

    /// Reads `path` and resolves a relative model file against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if let ModelConfig::File { path: model_path } = &mut cfg.model {
            if model_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *model_path = dir.join(&*model_path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BaiError::Parse(e.to_string()))
    }

    pub fn strategy_kinds(&self) -> Result<Vec<StrategyKind>> {
        self.strategies.names.iter().map(|n| n.parse()).collect()
    }

    /// Checkpoints with the `[t_max]` default applied.
    pub fn checkpoints(&self) -> Vec<usize> {
        if self.experiment.checkpoints.is_empty() {
            vec![self.experiment.t_max]
        } else {
            self.experiment.checkpoints.clone()
        }
    }

    pub fn build_model(&self) -> Result<LocationShiftBandit> {
        match &self.model {
            ModelConfig::Synthetic {
                arms,
                dim,
                mu_best,
                mu_sub,
                variances,
                seed,
            } => {
                let design = SyntheticDesign {
                    dim: *dim,
                    variances: variances.clone(),
                    ..SyntheticDesign::new(*arms, *mu_best, *mu_sub)
                };
                let seed =
                    seed.unwrap_or_else(|| trial_seed(self.experiment.master_seed, "model", 0));
                design.build(&mut from_seed(seed))
            }
            ModelConfig::Constant {
                means,
                variances,
                context,
            } => {
                let context = context
                    .clone()
                    .unwrap_or_else(ContextDistribution::synthetic_default);
                LocationShiftBandit::constant(means, variances, context)
            }
            ModelConfig::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    BaiError::config(format!("cannot read model file {}: {e}", path.display()))
                })?;
                LocationShiftBandit::from_toml(&text)
            }
        }
    }

    /// Checks everything that does not need the model.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.n_trials == 0 {
            return Err(BaiError::config("n_trials must be at least 1"));
        }
        if e.n_mc == 0 {
            return Err(BaiError::config("n_mc must be positive"));
        }
        let cps = self.checkpoints();
        if cps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BaiError::config("checkpoints must be strictly increasing"));
        }
        if cps.last().is_some_and(|&t| t > e.t_max) {
            return Err(BaiError::config("checkpoints may not exceed t_max"));
        }
        self.strategy_kinds()?;
        Ok(())
    }

    /// Checks the parts that depend on the model's number of arms.
    pub fn validate_for(&self, model: &LocationShiftBandit) -> Result<()> {
        self.validate()?;
        let k = model.num_arms();
        if self.checkpoints()[0] < k {
            return Err(BaiError::config(format!(
                "first checkpoint {} is smaller than the {k} arms",
                self.checkpoints()[0]
            )));
        }
        Ok(())
    }
}
