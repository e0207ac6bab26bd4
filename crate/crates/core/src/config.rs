//! TOML run-config files.
//!
//! Every key is optional; an empty file reproduces the defaults. Grids are
//! either a preset name or an explicit list:
//!
//! ```toml
//! seed = 7
//! [env]
//! states = "granular"
//! actions = [0.0, 0.05, 0.1, 0.2]
//! [agent]
//! update = "batch"
//! ```
//!
//! `epsilon` is read as the greedy probability by default
//! (`epsilon_meaning = "greedy"`, so 0.9 means 10% exploration); set
//! `epsilon_meaning = "explore"` to treat it as the exploration rate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{self, EnvConfig};
use crate::error::{Error, Result};
use crate::harness::{IllustrativeSetup, RunConfig};
use crate::qlearn::{AgentConfig, UpdateMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridPreset {
    Sparse,
    Granular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Preset(GridPreset),
    Values(Vec<f64>),
}

impl GridSpec {
    fn states(&self) -> Vec<f64> {
        match self {
            GridSpec::Preset(GridPreset::Sparse) => env::sparse_states(),
            GridSpec::Preset(GridPreset::Granular) => env::granular_states(),
            GridSpec::Values(v) => v.clone(),
        }
    }

    fn actions(&self) -> Vec<f64> {
        match self {
            GridSpec::Preset(GridPreset::Sparse) => env::sparse_actions(),
            GridSpec::Preset(GridPreset::Granular) => env::granular_actions(),
            GridSpec::Values(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonMeaning {
    Greedy,
    Explore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyPreset {
    Uniform,
}

/// Discount policy for histogram sampling: uniform over the whole action
/// grid, or uniform over the listed discounts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Preset(PolicyPreset),
    Discounts(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub base_price: f64,
    pub steepness: f64,
    pub states: GridSpec,
    pub actions: GridSpec,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            base_price: env::DEFAULT_BASE_PRICE,
            steepness: env::DEFAULT_STEEPNESS,
            states: GridSpec::Preset(GridPreset::Sparse),
            actions: GridSpec::Preset(GridPreset::Sparse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub epsilon_meaning: EpsilonMeaning,
    pub update: UpdateMode,
    pub batch_size: usize,
    pub flush_residual: bool,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epsilon: 0.9,
            epsilon_meaning: EpsilonMeaning::Greedy,
            update: UpdateMode::Single,
            batch_size: 1000,
            flush_residual: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub mc_samples: u64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { mc_samples: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramSection {
    pub state_index: usize,
    pub policy: PolicySpec,
    pub samples: u64,
}

impl Default for HistogramSection {
    fn default() -> Self {
        Self {
            state_index: 0,
            policy: PolicySpec::Preset(PolicyPreset::Uniform),
            samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IllustrativeSection {
    pub beta: f64,
    pub tracked_discount: f64,
}

impl Default for IllustrativeSection {
    fn default() -> Self {
        Self {
            beta: 0.6,
            tracked_discount: 0.17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub seed: u64,
    /// Replication count for `factorial` and `illustrate`.
    pub seeds: usize,
    pub iterations: usize,
    pub rolling_window: usize,
    pub convergence_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracked_cell: Option<[usize; 2]>,
    pub env: EnvSection,
    pub agent: AgentSection,
    pub oracle: OracleSection,
    pub histogram: HistogramSection,
    pub illustrative: IllustrativeSection,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: 20,
            iterations: crate::harness::DEFAULT_ITERATIONS,
            rolling_window: crate::harness::DEFAULT_ROLLING_WINDOW,
            convergence_fraction: crate::harness::DEFAULT_CONVERGENCE_FRACTION,
            tracked_cell: None,
            env: EnvSection::default(),
            agent: AgentSection::default(),
            oracle: OracleSection::default(),
            histogram: HistogramSection::default(),
            illustrative: IllustrativeSection::default(),
        }
    }
}

impl RunConfigFile {
    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Fully expanded TOML; parsing it yields an identical config.
    pub fn to_canonical(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let run = self.run_config()?;
        run.validate()?;
        self.illustrative_setup().run_config(UpdateMode::Single, self.seed)?;
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be >= 1".into()));
        }
        if self.oracle.mc_samples == 0 {
            return Err(Error::Config("oracle.mc_samples must be >= 1".into()));
        }
        if self.histogram.samples == 0 {
            return Err(Error::Config("histogram.samples must be >= 1".into()));
        }
        run.env.state(self.histogram.state_index)?;
        self.histogram_policy(&run.env)?;
        Ok(())
    }

    pub fn env(&self) -> Result<EnvConfig> {
        EnvConfig::new(
            self.env.base_price,
            self.env.steepness,
            self.env.states.states(),
            self.env.actions.actions(),
        )
    }

    pub fn agent(&self) -> Result<AgentConfig> {
        let a = &self.agent;
        if !(0.0..=1.0).contains(&a.epsilon) {
            return Err(Error::Config(format!("agent.epsilon {} outside [0, 1]", a.epsilon)));
        }
        let explore_prob = match a.epsilon_meaning {
            EpsilonMeaning::Greedy => 1.0 - a.epsilon,
            EpsilonMeaning::Explore => a.epsilon,
        };
        let cfg = AgentConfig {
            learning_rate: a.learning_rate,
            explore_prob,
            update_mode: a.update,
            batch_size: a.batch_size,
            flush_residual: a.flush_residual,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            env: self.env()?,
            agent: self.agent()?,
            iterations: self.iterations,
            seed: self.seed,
            rolling_window: self.rolling_window,
            convergence_fraction: self.convergence_fraction,
            tracked_cell: self.tracked_cell.map(|[s, a]| (s, a)),
        })
    }

    /// Fixed-customer setup using this file's price, steepness, agent and run length.
    pub fn illustrative_setup(&self) -> IllustrativeSetup {
        IllustrativeSetup {
            base_price: self.env.base_price,
            steepness: self.env.steepness,
            beta: self.illustrative.beta,
            tracked_discount: self.illustrative.tracked_discount,
            agent: self.agent().unwrap_or_default(),
            iterations: self.iterations,
            rolling_window: self.rolling_window,
            convergence_fraction: self.convergence_fraction,
        }
    }

    /// Per-action weights for the histogram policy.
    pub fn histogram_policy(&self, env: &EnvConfig) -> Result<Vec<f64>> {
        match &self.histogram.policy {
            PolicySpec::Preset(PolicyPreset::Uniform) => Ok(env::uniform_policy(env.n_actions())),
            PolicySpec::Discounts(ds) => {
                if ds.is_empty() {
                    return Err(Error::Config("histogram.policy list is empty".into()));
                }
                let mut w = vec![0.0; env.n_actions()];
                for &d in ds {
                    let i = env.action_index_of(d).ok_or_else(|| {
                        Error::Config(format!("histogram.policy discount {d} is not on the action grid"))
                    })?;
                    w[i] = 1.0;
                }
                Ok(w)
            }
        }
    }
}
