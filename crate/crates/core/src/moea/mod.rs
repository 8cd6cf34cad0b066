//! Constrained NSGA-II and the hypervolume indicator.

mod hypervolume;
mod nsga2;
mod operators;
mod sort;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hypervolume::hypervolume;
pub use nsga2::nsga2_optimize;
pub use operators::{binary_tournament, polynomial_mutation, sbx_crossover};
pub use sort::{constrained_dominates, crowding_distance, fast_non_dominated_sort, pareto_dominates};

#[derive(Debug, Error)]
pub enum MoeaError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("invalid decision variable {index}: {reason}")]
    InvalidVariable { index: usize, reason: String },
    #[error("evaluation returned {0}")]
    InvalidEvaluation(String),
    #[error("evaluation failed: {0}")]
    Evaluation(#[source] Box<dyn std::error::Error + Send + Sync>),
    #[error("point {index} does not dominate the reference point")]
    OutsideReference { index: usize },
    #[error("point {index} has {found} objectives, expected {expected}")]
    DimensionMismatch { index: usize, found: usize, expected: usize },
}

/// Bounds of one decision variable. Integer variables are evolved as reals
/// and rounded half up before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

impl VariableSpec {
    pub fn real(lower: f64, upper: f64) -> Self {
        VariableSpec { lower, upper, integer: false }
    }

    pub fn integer(lower: f64, upper: f64) -> Self {
        VariableSpec { lower, upper, integer: true }
    }

    pub fn decode(&self, x: f64) -> f64 {
        let x = x.clamp(self.lower, self.upper);
        if self.integer {
            (x + 0.5).floor().clamp(self.lower.ceil(), self.upper.floor())
        } else {
            x
        }
    }
}

pub fn decode(specs: &[VariableSpec], genome: &[f64]) -> Vec<f64> {
    specs.iter().zip(genome).map(|(s, &x)| s.decode(x)).collect()
}

/// Objective values (minimized) and constraint violation magnitudes
/// (0 = satisfied).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objectives: Vec<f64>,
    pub violations: Vec<f64>,
}

/// A minimization problem. `evaluate` receives decoded variables and must be
/// deterministic.
pub trait Problem: Sync {
    type Error: std::error::Error + Send + Sync + 'static;

    fn variables(&self) -> &[VariableSpec];

    /// Maps a raw genome to the point that is evaluated and returned.
    fn decode(&self, genome: &[f64]) -> Vec<f64> {
        decode(self.variables(), genome)
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, Self::Error>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub objectives: Vec<f64>,
    pub violations: Vec<f64>,
    pub total_violation: f64,
    /// Front index, 0 for the non-dominated front.
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn new(genome: Vec<f64>, objectives: Vec<f64>, violations: Vec<f64>) -> Self {
        let total_violation = violations.iter().sum();
        Individual {
            genome,
            objectives,
            violations,
            total_violation,
            rank: 0,
            crowding: 0.0,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.total_violation <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub max_evaluations: usize,
    pub population_size: usize,
    pub sbx_rate: f64,
    pub sbx_distribution_index: f64,
    pub pm_rate: f64,
    pub pm_distribution_index: f64,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            max_evaluations: 9712,
            population_size: 145,
            sbx_rate: 0.88,
            sbx_distribution_index: 18.9,
            pm_rate: 0.55,
            pm_distribution_index: 10.8,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    /// Tuned set for Inspiral-shaped workflows.
    pub fn inspiral() -> Self {
        Hyperparameters {
            sbx_rate: 0.82,
            sbx_distribution_index: 17.2,
            pm_rate: 0.58,
            pm_distribution_index: 12.5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MoeaError> {
        let bad = |m: &str| Err(MoeaError::InvalidHyperparameters(m.to_string()));
        if !(0.0..=1.0).contains(&self.sbx_rate) || !(0.0..=1.0).contains(&self.pm_rate) {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.sbx_distribution_index > 0.0 && self.pm_distribution_index > 0.0) {
            return bad("distribution indices must be positive");
        }
        if self.population_size < 4 {
            return bad("population must have at least 4 individuals");
        }
        if self.max_evaluations == 0 {
            return bad("max_evaluations must be positive");
        }
        Ok(())
    }
}

pub(crate) fn validate_variables(specs: &[VariableSpec]) -> Result<(), MoeaError> {
    for (index, s) in specs.iter().enumerate() {
        if !(s.lower.is_finite() && s.upper.is_finite()) || s.lower > s.upper {
            return Err(MoeaError::InvalidVariable {
                index,
                reason: format!("bounds [{}, {}]", s.lower, s.upper),
            });
        }
    }
    Ok(())
}
