//! Run configuration file.
//!
//! ```json
//! {
//!   "topology": [2, 4, 1],
//!   "activations": "taylor3",
//!   "dataset_path": "../data/xor.json",
//!   "method": "pseudo_newton",
//!   "steplength": {"mode": "one_step_newton", "omega": 0.5},
//!   "solver": "min_norm",
//!   "trial": {"count": 100, "base_seed": 0, "max_iters": 5000},
//!   "verify": {"tolerance": 1e-5}
//! }
//! ```
//!
//! `activations` is one name for every layer or a list with one name per
//! weight layer. Omitted fields take the method's defaults. Relative paths
//! resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use holonewt::oracle::FdConfig;
use holonewt::steplength::StepMode;
use holonewt::trainer::{Method, TrainConfig};
use holonewt::{Activation, Dataset, NetworkTopology, SolverKind};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Activations {
    Uniform(Activation),
    PerLayer(Vec<Activation>),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub mode: Option<StepMode>,
    pub omega: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSpec {
    pub count: Option<u64>,
    pub base_seed: Option<u64>,
    pub error_target: Option<f64>,
    pub max_iters: Option<u64>,
    pub blowup_threshold: Option<f64>,
    pub stall_tolerance: Option<f64>,
    pub init_range: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub tolerance: f64,
    /// Random samples drawn when no dataset is configured.
    pub samples: usize,
    pub finite_difference: FdConfig,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            tolerance: 1e-5,
            samples: 4,
            finite_difference: FdConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: Vec<usize>,
    pub activations: Activations,
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    pub method: Method,
    #[serde(default)]
    pub steplength: StepSpec,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default)]
    pub trial: TrialSpec,
    #[serde(default)]
    pub verify: VerifySpec,
}

/// A parsed config plus the directory its relative paths are taken from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub raw: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let raw: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("malformed config {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = Self { raw, base_dir };
        loaded.topology()?;
        loaded.train_config()?;
        Ok(loaded)
    }

    pub fn topology(&self) -> Result<NetworkTopology> {
        let depth = self.raw.topology.len().saturating_sub(1);
        let acts = match &self.raw.activations {
            Activations::Uniform(a) => vec![*a; depth],
            Activations::PerLayer(v) => v.clone(),
        };
        Ok(NetworkTopology::new(self.raw.topology.clone(), acts)?)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::new(self.raw.method);
        let s = &self.raw.steplength;
        if let Some(mode) = s.mode {
            c.step.mode = mode;
            // A constant step defaults to the plain update, the one-step rule to ω = 0.5.
            c.step.omega = if mode == StepMode::Constant { 1.0 } else { 0.5 };
        }
        if let Some(omega) = s.omega {
            c.step.omega = omega;
        }
        if let Some(mu) = s.mu {
            c.step.constant_mu = mu;
        }
        c.solver = self.raw.solver;
        let t = &self.raw.trial;
        c.error_target = t.error_target.unwrap_or(c.error_target);
        c.max_iters = t.max_iters.unwrap_or(c.max_iters);
        c.blowup_threshold = t.blowup_threshold.unwrap_or(c.blowup_threshold);
        c.stall_tolerance = t.stall_tolerance.unwrap_or(c.stall_tolerance);
        c.init_range = t.init_range.unwrap_or(c.init_range);
        c.validate()?;
        Ok(c)
    }

    pub fn dataset_path(&self) -> Option<PathBuf> {
        self.raw
            .dataset_path
            .as_ref()
            .map(|p| self.base_dir.join(p))
    }

    /// The configured dataset, checked against the topology.
    pub fn dataset(&self) -> Result<Dataset> {
        let Some(path) = self.dataset_path() else {
            bail!("config has no dataset_path");
        };
        let ds = holonewt::io::read_dataset(&path)
            .with_context(|| format!("cannot load dataset {}", path.display()))?;
        ds.check_against(&self.topology()?)?;
        Ok(ds)
    }
}
