//! Autoscaling strategies: the multi-objective genetic autoscaler, the
//! spot-ratio heuristic baseline and a no-op strategy.

pub mod cmi;
mod model;
mod objectives;
mod select;
pub mod siaa;
mod subproblem;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moea::MoeaError;
use crate::workflow::TaskId;

pub use model::{model_schedule, objective_makespan, realize_plan, InstanceRef, ModelSchedule, NewInstance, PlannedInstance, Realization};
pub use objectives::{evaluate_constraints, normalized_violations, objective_cost, objective_errors_impact};
pub use select::{ideal_distance, normalize_front, select_solution};
pub use subproblem::{build_subproblem, priority_order, AutoscalingSubproblem, PeriodTask, PoolInstance, SubproblemInputs};

/// Target instance counts per catalog type and the bid for new spot
/// instances of each type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPlan {
    pub x_od: Vec<u32>,
    pub x_s: Vec<u32>,
    pub x_bid: Vec<f64>,
}

impl ScalingPlan {
    pub fn empty(n: usize) -> Self {
        ScalingPlan {
            x_od: vec![0; n],
            x_s: vec![0; n],
            x_bid: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x_od.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_od.is_empty()
    }

    pub fn total_instances(&self) -> u32 {
        self.x_od.iter().chain(&self.x_s).sum()
    }

    pub fn count(&self, i: usize) -> u32 {
        self.x_od[i] + self.x_s[i]
    }
}

#[derive(Debug, Error)]
pub enum AutoscalerError {
    #[error("invalid subproblem: {0}")]
    InvalidSubproblem(String),
    #[error(transparent)]
    Optimizer(#[from] MoeaError),
}

/// How ready tasks that no plan has placed are dispatched between ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DispatchMode {
    /// Earliest-completion-time onto per-slot queues, busy slots included.
    QueuedEct,
    /// Free slots only, on-demand before spot.
    FreeSlotsOnDemandFirst,
}

/// Output of one autoscaling tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decision {
    /// `None` leaves the pool untouched.
    pub plan: Option<ScalingPlan>,
    /// Per-slot task queues, parallel to the slots of
    /// `realize_plan(subproblem, plan)`.
    pub queues: Option<Vec<Vec<TaskId>>>,
    pub fallback: bool,
    pub violations: Vec<f64>,
    pub predicted_makespan: Option<f64>,
}

pub trait Autoscaler: Send {
    fn name(&self) -> String;

    fn dispatch_mode(&self) -> DispatchMode;

    fn decide(&mut self, sp: &AutoscalingSubproblem, tick: usize) -> Result<Decision, AutoscalerError>;
}

/// Keeps whatever instances exist.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullAutoscaler;

impl Autoscaler for NullAutoscaler {
    fn name(&self) -> String {
        "null".into()
    }

    fn dispatch_mode(&self) -> DispatchMode {
        DispatchMode::QueuedEct
    }

    fn decide(&mut self, _: &AutoscalingSubproblem, _: usize) -> Result<Decision, AutoscalerError> {
        Ok(Decision::default())
    }
}

/// Per-tick seed derived from a run seed (splitmix64 finalizer).
pub fn tick_seed(base: u64, tick: usize) -> u64 {
    let mut z = base.wrapping_add((tick as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
