use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ReferenceConfig;
use crate::ego::EgoConfig;
use crate::error::{Error, Result};
use crate::simulators::{CcfConfig, InventoryConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Inventory,
    Ccf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nbro,
    Plugin,
    PbExp,
    PbLognormal,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nbro => "nbro",
            Self::Plugin => "plugin",
            Self::PbExp => "pb_exp",
            Self::PbLognormal => "pb_lognormal",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            other => Err(Error::Config(format!("unknown scale {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PosteriorConfig {
    pub alpha: f64,
    /// Fixed stick-breaking truncation; automatic when absent.
    pub truncation: Option<usize>,
}

impl Default for PosteriorConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            truncation: None,
        }
    }
}

/// Everything an experiment needs besides the root seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// Real-world sample size for single runs and the budget study.
    pub n: usize,
    /// Sample sizes swept by the comparison and the convergence-in-n study.
    pub n_values: Vec<usize>,
    pub macro_reps: usize,
    pub methods: Vec<Method>,
    /// Evaluation counts at which the budget study records the recommendation.
    pub checkpoints: Vec<usize>,
    /// Budget of the method comparison (the budget study uses `ego.budget`).
    pub compare_budget: usize,
    pub posterior: PosteriorConfig,
    pub ego: EgoConfig,
    pub reference: ReferenceConfig,
    pub inventory: InventoryConfig,
    pub ccf: CcfConfig,
    /// Replications and horizon of the long-run CCF truth estimate.
    pub ccf_truth_reps: usize,
    pub ccf_truth_days: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(ProblemKind::Inventory, Scale::Desk)
    }
}

impl ExperimentConfig {
    pub fn preset(problem: ProblemKind, scale: Scale) -> Self {
        let mut cfg = Self {
            problem,
            n: 10,
            n_values: vec![10, 100, 1000],
            macro_reps: 20,
            methods: vec![Method::Nbro, Method::Plugin, Method::PbExp, Method::PbLognormal],
            checkpoints: vec![30, 60, 90, 130],
            compare_budget: 50,
            posterior: PosteriorConfig::default(),
            ego: EgoConfig::default(),
            reference: ReferenceConfig::default(),
            inventory: InventoryConfig::default(),
            ccf: CcfConfig::default(),
            ccf_truth_reps: 30,
            ccf_truth_days: 10_000.0,
        };
        if problem == ProblemKind::Ccf {
            cfg.n = 1000;
            cfg.n_values = vec![1000];
            cfg.macro_reps = 5;
            cfg.methods = vec![Method::Nbro, Method::Plugin];
            cfg.ego.s0 = 50;
            cfg.ego.reps = 5;
            cfg.ego.budget = 100;
            cfg.compare_budget = 100;
            cfg.checkpoints = vec![50, 100];
        }
        if scale == Scale::Paper {
            cfg.macro_reps = 100;
            cfg.reference.draws = 10_000;
            cfg.reference.reps = 1000;
            if problem == ProblemKind::Inventory {
                cfg.n_values = vec![10, 20, 50, 100, 500, 1000, 10_000, 100_000, 500_000];
            }
        }
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_values.contains(&0) {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if self.compare_budget < self.ego.s0 {
            return Err(Error::Config("compare_budget below s0".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("checkpoints must be strictly increasing".into()));
        }
        if self.reference.draws == 0 || self.reference.reps == 0 || self.reference.grid_step <= 0.0 {
            return Err(Error::Config("reference draws, reps and grid step must be positive".into()));
        }
        if self.problem == ProblemKind::Ccf && self.methods.iter().any(|m| matches!(m, Method::PbExp | Method::PbLognormal)) {
            return Err(Error::Config("parametric baselines are not defined for the categorical route input".into()));
        }
        self.inventory.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = ExperimentConfig::preset(ProblemKind::Ccf, Scale::Desk);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        let partial = ExperimentConfig::from_toml("problem = \"inventory\"\nmacro_reps = 3\n[ego]\nbudget = 40\n").unwrap();
        assert_eq!(partial.macro_reps, 3);
        assert_eq!(partial.ego.budget, 40);
        assert_eq!(partial.ego.s0, 30);
        assert!(ExperimentConfig::from_toml("bogus = [").is_err());
        let bad = ExperimentConfig {
            checkpoints: vec![60, 30],
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!("desk".parse::<Scale>().is_ok() && "huge".parse::<Scale>().is_err());
    }
}
