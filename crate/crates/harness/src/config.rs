//! Experiment configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spotflow_core::cloud::oob::{DEFAULT_GRID_POINTS, DEFAULT_STEP, DEFAULT_WINDOW};
use spotflow_core::moea::Hyperparameters;
use spotflow_core::workflow::generate::Family;

use crate::synthetic::SyntheticTraceSpec;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowSource {
    File { path: PathBuf },
    Generated { family: Family, tasks: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    /// A recorded trace; the OOB model trains on data before `split`.
    File { path: PathBuf, split: f64 },
    Synthetic(SyntheticTraceSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiaaGrid {
    pub spot_ratios: Vec<f64>,
    pub confidences: Vec<f64>,
}

impl Default for SiaaGrid {
    fn default() -> Self {
        SiaaGrid {
            spot_ratios: (0..=10).map(|i| i as f64 / 10.0).collect(),
            confidences: (1..=5).map(|i| i as f64 * 0.05).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Strategies {
    /// The seed field is replaced by the run seed.
    pub cmi: Option<Hyperparameters>,
    pub siaa: Option<SiaaGrid>,
}

impl Default for Strategies {
    fn default() -> Self {
        Strategies {
            cmi: Some(Hyperparameters::default()),
            siaa: Some(SiaaGrid::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OobSettings {
    pub window: f64,
    pub step: f64,
    pub grid_points: usize,
}

impl Default for OobSettings {
    fn default() -> Self {
        OobSettings {
            window: DEFAULT_WINDOW,
            step: DEFAULT_STEP,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// How SIAA runs are grouped when tested against CMI.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// One test per spot ratio, pooling the confidence levels.
    #[default]
    PerSpotRatio,
    /// One test per (spot ratio, confidence) pair.
    PerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub workflow: WorkflowSource,
    pub trace: TraceSource,
    /// Catalog JSON file; the built-in catalog when absent.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub strategies: Strategies,
    /// USD per hour.
    pub budget: f64,
    #[serde(default = "default_x_max")]
    pub x_max: u32,
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub boot_delay: f64,
    #[serde(default)]
    pub oob: OobSettings,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_x_max() -> u32 {
    20
}

fn default_period() -> f64 {
    3600.0
}

fn default_alpha() -> f64 {
    0.001
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let WorkflowSource::File { path } = &mut self.workflow {
            fix(path);
        }
        if let TraceSource::File { path, .. } = &mut self.trace {
            fix(path);
        }
        if let Some(p) = &mut self.catalog {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    /// Checks everything that does not need the input files.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return bad(format!("budget must be positive, got {}", self.budget));
        }
        if self.x_max == 0 {
            return bad("x_max must be at least 1".into());
        }
        if !(self.period > 0.0) {
            return bad("period must be positive".into());
        }
        if !(self.boot_delay >= 0.0) {
            return bad("boot delay must be non-negative".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)".into());
        }
        if !(self.oob.window > 0.0 && self.oob.step > 0.0 && self.oob.grid_points >= 1) {
            return bad("OOB window, step and grid size must be positive".into());
        }
        if self.strategies.cmi.is_none() && self.strategies.siaa.is_none() {
            return bad("no strategy configured".into());
        }
        if let Some(hp) = &self.strategies.cmi {
            hp.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if let Some(grid) = &self.strategies.siaa {
            if grid.spot_ratios.is_empty() || grid.confidences.is_empty() {
                return bad("SIAA grids must not be empty".into());
            }
            if let Some(sr) = grid.spot_ratios.iter().find(|s| !(0.0..=1.0).contains(*s)) {
                return bad(format!("spot ratio {sr} outside [0, 1]"));
            }
            if let Some(c) = grid.confidences.iter().find(|c| !(**c > 0.0 && **c <= 1.0)) {
                return bad(format!("confidence {c} outside (0, 1]"));
            }
        }
        if let TraceSource::Synthetic(spec) = &self.trace {
            spec.validate().map_err(HarnessError::Config)?;
        }
        if let WorkflowSource::Generated { family, tasks, .. } = &self.workflow {
            if *tasks < family.min_tasks() {
                return bad(format!("{family} needs at least {} tasks", family.min_tasks()));
            }
        }
        Ok(())
    }
}
