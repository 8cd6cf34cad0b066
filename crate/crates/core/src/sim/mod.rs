//! Discrete-event execution of a workflow on an elastic pool of on-demand
//! and spot instances, with spot-price replay, out-of-bid failures, hourly
//! billing and periodic autoscaling.

mod engine;
mod events;
mod schedule;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoscalers::{AutoscalerError, ScalingPlan};
use crate::cloud::{CloudError, InstanceType, InstanceUsage, OobProbabilityModel, PricingModel, SpotPriceTrace};
use crate::workflow::WorkflowError;

pub use engine::{run_simulation, Instance, InstanceState, Simulation, StepOutcome};
pub use events::{EventKind, EventQueue, SimEvent};
pub use schedule::{schedule_ect, SlotAvailability};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("spot trace exhausted at simulation time {time}")]
    TraceExhausted { time: f64 },
    #[error("simulation exceeded {limit} s without finishing")]
    Timeout { limit: f64 },
    #[error("no pending events but {remaining} tasks unfinished")]
    Stalled { remaining: usize },
    #[error("unknown instance type `{0}` in the initial pool")]
    UnknownInstanceType(String),
    #[error(transparent)]
    Autoscaler(#[from] AutoscalerError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// An instance that exists before the first tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialInstance {
    pub instance_type: String,
    pub pricing: PricingModel,
    #[serde(default)]
    pub bid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// USD per hour available to the autoscaler.
    pub budget: f64,
    /// Per-type instance cap.
    pub x_max: u32,
    /// Seconds between autoscaling ticks; the first tick is at t = 0.
    pub period: f64,
    pub boot_delay: f64,
    /// Trace time corresponding to simulation time 0.
    pub trace_offset: f64,
    pub max_time: f64,
    pub initial_pool: Vec<InitialInstance>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            budget: 1.0,
            x_max: 20,
            period: 3600.0,
            boot_delay: 0.0,
            trace_offset: 0.0,
            max_time: 3600.0 * 24.0 * 365.0,
            initial_pool: Vec::new(),
        }
    }
}

/// Read-only market inputs shared between runs.
#[derive(Debug, Clone)]
pub struct SimEnv {
    pub catalog: Arc<Vec<InstanceType>>,
    /// Spot prices in trace time.
    pub trace: Arc<SpotPriceTrace>,
    pub oob_model: Arc<OobProbabilityModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub index: usize,
    pub time: f64,
    pub plan: Option<ScalingPlan>,
    pub fallback: bool,
    pub violations: Vec<f64>,
    pub predicted_makespan: Option<f64>,
    /// Workflow indices of the tasks pending at the tick.
    pub period_tasks: Vec<usize>,
    pub acquired: usize,
    pub released: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub running_tasks: usize,
    pub vcpus: u32,
    pub accumulated_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub makespan: f64,
    pub total_cost: f64,
    pub task_failures: u64,
    pub oob_errors: u64,
    pub instances_on_demand: u64,
    pub instances_spot: u64,
    pub fallbacks: u64,
    pub ticks: Vec<TickRecord>,
    pub steps: Vec<StepRecord>,
    /// Instance lifetimes in simulation time.
    pub usage: Vec<InstanceUsage>,
}

impl RunMetrics {
    pub fn steps_csv(&self) -> String {
        let mut out = String::from("time,running_tasks,vcpus,accumulated_cost\n");
        for s in &self.steps {
            out.push_str(&format!("{},{},{},{:.6}\n", s.time, s.running_tasks, s.vcpus, s.accumulated_cost));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}
