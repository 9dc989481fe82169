//! TOML experiment configuration.
//!
//! ```toml
//! algorithm = "hinge_lmc"      # or "smooth_ftl", "uniform_baseline"
//! horizon = 1000
//! replicates = 5
//! base_seed = 7
//! gamma = 0.25
//!
//! [model]
//! context_dim = 2
//! actions = 3
//! radius = 2.0
//!
//! [environment]
//! kind = "stochastic"
//! symmetric_scale = 1.1        # or theta_star = [...]
//! margin_floor = 1.4
//! label_noise = 0.05
//!
//! [hinge_lmc]                  # every key optional
//! eta = 0.05
//!
//! [output]
//! dir = "results"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{BenchmarkSolver, Environment, ScriptedEnv, StochasticEnv};
use crate::error::{Error, Result};
use crate::hinge_lmc::{HingeLmcConfig, Resampling};
use crate::model::{Context, ModelSpec, ParamVector};
use crate::smooth_ftl::FtlConfig;
use crate::surrogate::{LossVector, Margin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    HingeLmc,
    SmoothFtl,
    UniformBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub replicates: usize,
    pub base_seed: u64,
    /// Margin used by the learner and by every benchmark.
    pub gamma: Margin,
    pub model: ModelSpec,
    pub environment: EnvironmentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hinge_lmc: Option<HingeLmcOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smooth_ftl: Option<FtlOverrides>,
    #[serde(default)]
    pub benchmark: BenchmarkSolver,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRound {
    pub context: Context,
    pub loss: LossVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Stochastic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_star: Option<ParamVector>,
        /// Builds a symmetric `θ*` of this block norm when `theta_star` is absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        symmetric_scale: Option<f64>,
        margin_floor: f64,
        label_noise: f64,
    },
    Scripted {
        rounds: Vec<ScriptedRound>,
    },
}

/// A concrete environment built from [`EnvironmentConfig`].
#[derive(Debug, Clone, PartialEq)]
pub enum EnvInstance {
    Stochastic(StochasticEnv),
    Scripted(ScriptedEnv),
}

impl EnvInstance {
    pub fn as_env(&self) -> &(dyn Environment + Sync) {
        match self {
            EnvInstance::Stochastic(e) => e,
            EnvInstance::Scripted(e) => e,
        }
    }
}

impl EnvironmentConfig {
    pub fn build(&self, spec: ModelSpec, horizon: usize) -> Result<EnvInstance> {
        match self {
            EnvironmentConfig::Stochastic { theta_star, symmetric_scale, margin_floor, label_noise } => {
                let theta = match (theta_star, symmetric_scale) {
                    (Some(t), None) => t.clone(),
                    (None, Some(c)) => StochasticEnv::symmetric_theta(&spec, *c),
                    _ => {
                        return Err(Error::config(
                            "stochastic environment needs exactly one of theta_star, symmetric_scale",
                        ))
                    }
                };
                Ok(EnvInstance::Stochastic(StochasticEnv::new(spec, theta, *margin_floor, *label_noise)?))
            }
            EnvironmentConfig::Scripted { rounds } => {
                if rounds.len() < horizon {
                    return Err(Error::config(format!(
                        "scripted environment has {} rounds but horizon is {horizon}",
                        rounds.len()
                    )));
                }
                let rounds = rounds.iter().map(|r| (r.context.clone(), r.loss.clone())).collect();
                Ok(EnvInstance::Scripted(ScriptedEnv::new(spec, rounds)?))
            }
        }
    }
}

/// Optional replacements for the practical Hinge-LMC defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HingeLmcOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resampling: Option<Resampling>,
}

impl HingeLmcOverrides {
    pub fn resolve(&self, spec: &ModelSpec, horizon: usize, gamma: Margin, seed: u64) -> HingeLmcConfig {
        let mut c = HingeLmcConfig::practical(spec, horizon, gamma, seed);
        let step_given = self.step_size.is_some();
        if let Some(v) = self.eta {
            c.eta = v;
        }
        if let Some(v) = self.mu {
            c.mu = v;
        }
        if let Some(v) = self.resample_cap {
            c.resample_cap = v;
        }
        if let Some(v) = self.steps {
            c.lmc.steps = v;
            if !step_given {
                c.lmc.step_size = spec.radius().powi(2) / v.max(1) as f64;
            }
        }
        if let Some(v) = self.step_size {
            c.lmc.step_size = v;
        }
        if let Some(v) = self.smoothing_samples {
            c.lmc.smoothing_samples = v;
        }
        if let Some(v) = self.smoothing_width {
            c.lmc.smoothing_width = v;
        }
        if let Some(v) = self.ridge {
            c.lmc.ridge = v;
        }
        c.resampling =
            self.resampling.unwrap_or(Resampling::Fast { thin: c.lmc.steps.div_ceil(c.resample_cap.max(1)).max(1) });
        c
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtlOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erm_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erm_step_size: Option<f64>,
}

impl FtlOverrides {
    pub fn resolve(&self, spec: &ModelSpec, horizon: usize, gamma: Margin, seed: u64) -> FtlConfig {
        let mut c = FtlConfig::practical(spec, horizon, gamma, seed);
        if let Some(v) = self.mu {
            c.mu = v;
        }
        if let Some(v) = self.erm_steps {
            c.erm_steps = v;
        }
        if let Some(v) = self.erm_step_size {
            c.erm_step_size = v;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_csv")]
    pub csv: PathBuf,
    #[serde(default = "default_summary")]
    pub summary: PathBuf,
    #[serde(default = "default_svg")]
    pub svg: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_csv() -> PathBuf {
    PathBuf::from("rounds.csv")
}

fn default_summary() -> PathBuf {
    PathBuf::from("summary.json")
}

fn default_svg() -> PathBuf {
    PathBuf::from("regret.svg")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), csv: default_csv(), summary: default_summary(), svg: default_svg() }
    }
}

impl OutputConfig {
    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(&self.csv)
    }

    pub fn summary_path(&self) -> PathBuf {
        self.dir.join(&self.summary)
    }

    pub fn svg_path(&self) -> PathBuf {
        self.dir.join(&self.svg)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates must be at least 1"));
        }
        self.environment.build(self.model, self.horizon)?;
        let k = self.model.actions();
        match self.algorithm {
            Algorithm::HingeLmc => {
                let c = self.hinge_lmc.clone().unwrap_or_default().resolve(&self.model, self.horizon, self.gamma, 0);
                c.validate(k)
            }
            Algorithm::SmoothFtl => {
                let c = self.smooth_ftl.clone().unwrap_or_default().resolve(&self.model, self.horizon, self.gamma, 0);
                c.validate(k)
            }
            Algorithm::UniformBaseline => Ok(()),
        }
    }
}
