use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use crate::cloud::{InstanceType, OobProbabilityModel, PricingModel};
use crate::workflow::{slack_times, TaskId, TaskState, Workflow};

/// An alive instance as seen by the autoscaler.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolInstance {
    pub id: usize,
    pub type_idx: usize,
    pub pricing: PricingModel,
    pub bid: Option<f64>,
    pub busy: bool,
    /// When each slot can take its next task.
    pub slot_free: Vec<f64>,
}

/// A task still to be placed in this period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodTask {
    pub task: TaskId,
    pub work: f64,
    pub ready: bool,
    /// Earliest start imposed by parents outside the period (completed or
    /// running), never before `now`.
    pub base_ready: f64,
    /// Positions in `period_tasks` of parents that are themselves pending.
    pub period_parents: Vec<usize>,
}

/// Frozen state a scaling decision is evaluated against.
#[derive(Debug, Clone)]
pub struct AutoscalingSubproblem {
    pub now: f64,
    pub catalog: Arc<Vec<InstanceType>>,
    /// Current market price per type; `None` where no spot market exists.
    pub spot_prices: Vec<Option<f64>>,
    pub oob_model: Arc<OobProbabilityModel>,
    /// USD per hour.
    pub budget: f64,
    pub x_max: Vec<u32>,
    pub busy_od: Vec<u32>,
    pub busy_s: Vec<u32>,
    /// Pending tasks in dispatch priority order (parents before children).
    pub period_tasks: Vec<PeriodTask>,
    pub pool: Vec<PoolInstance>,
    pub boot_delay: f64,
}

impl AutoscalingSubproblem {
    pub fn n(&self) -> usize {
        self.catalog.len()
    }

    pub fn x_min(&self, i: usize) -> u32 {
        self.busy_od[i] + self.busy_s[i]
    }

    /// Spot purchases are allowed only while the market is at or below the
    /// on-demand price.
    pub fn spot_available(&self, i: usize) -> bool {
        matches!(self.spot_prices[i], Some(p) if p <= self.catalog[i].on_demand_price)
            && self.oob_model.curve(&self.catalog[i].name).is_some()
    }

    pub fn ready_count(&self) -> usize {
        self.period_tasks.iter().filter(|t| t.ready).count()
    }
}

pub struct SubproblemInputs {
    pub now: f64,
    pub catalog: Arc<Vec<InstanceType>>,
    pub spot_prices: Vec<Option<f64>>,
    pub oob_model: Arc<OobProbabilityModel>,
    pub budget: f64,
    pub x_max: Vec<u32>,
    pub pool: Vec<PoolInstance>,
    pub boot_delay: f64,
}

/// Uncompleted, non-running tasks of `w` in priority order: ascending slack
/// (durations at the fastest core of the catalog), then EST, then index,
/// never placing a task before one of its parents.
pub fn priority_order(w: &Workflow, catalog: &[InstanceType], now: f64) -> Vec<TaskId> {
    let fastest = catalog
        .iter()
        .map(|it| it.ecu_per_core)
        .fold(f64::MIN_POSITIVE, f64::max);
    let durations: BTreeMap<TaskId, f64> = w
        .tasks()
        .filter(|(_, t)| t.state() != TaskState::Completed)
        .map(|(id, t)| (id, t.work / fastest))
        .collect();
    let slack = slack_times(w, &durations, now);
    let est = crate::workflow::earliest_start_times(w, &durations, now);
    let pending = |id: TaskId| !matches!(w.state(id), TaskState::Completed | TaskState::Running | TaskState::Scheduled);

    let mut waiting_on: Vec<usize> = vec![0; w.len()];
    let mut heap = BinaryHeap::new();
    let key = |id: TaskId| Reverse((Key(slack[&id]), Key(est[&id]), id.0));
    for id in w.task_ids().filter(|&id| pending(id)) {
        waiting_on[id.0] = w.task(id).parents.iter().filter(|p| pending(**p)).count();
        if waiting_on[id.0] == 0 {
            heap.push(key(id));
        }
    }
    let mut order = Vec::new();
    while let Some(Reverse((_, _, i))) = heap.pop() {
        let id = TaskId(i);
        order.push(id);
        for &c in &w.task(id).children {
            if pending(c) {
                waiting_on[c.0] -= 1;
                if waiting_on[c.0] == 0 {
                    heap.push(key(c));
                }
            }
        }
    }
    order
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Freezes the current execution state: all pending tasks form the period,
/// busy instances fix the per-type minimum counts.
pub fn build_subproblem(w: &Workflow, inputs: SubproblemInputs) -> AutoscalingSubproblem {
    let n = inputs.catalog.len();
    let now = inputs.now;
    let order = priority_order(w, &inputs.catalog, now);
    let mut position = vec![usize::MAX; w.len()];
    for (k, id) in order.iter().enumerate() {
        position[id.0] = k;
    }
    let period_tasks = order
        .iter()
        .map(|&id| {
            let task = w.task(id);
            let mut base_ready = now;
            let mut period_parents = Vec::new();
            for &p in &task.parents {
                let parent = w.task(p);
                match parent.state() {
                    TaskState::Completed => {}
                    TaskState::Running | TaskState::Scheduled => {
                        base_ready = base_ready.max(parent.expected_finish().unwrap_or(now));
                    }
                    _ => period_parents.push(position[p.0]),
                }
            }
            PeriodTask {
                task: id,
                work: task.work,
                ready: task.state() == TaskState::Ready,
                base_ready,
                period_parents,
            }
        })
        .collect();
    let mut busy_od = vec![0; n];
    let mut busy_s = vec![0; n];
    for inst in inputs.pool.iter().filter(|i| i.busy) {
        match inst.pricing {
            PricingModel::OnDemand => busy_od[inst.type_idx] += 1,
            PricingModel::Spot => busy_s[inst.type_idx] += 1,
        }
    }
    AutoscalingSubproblem {
        now,
        catalog: inputs.catalog,
        spot_prices: inputs.spot_prices,
        oob_model: inputs.oob_model,
        budget: inputs.budget,
        x_max: inputs.x_max,
        busy_od,
        busy_s,
        period_tasks,
        pool: inputs.pool,
        boot_delay: inputs.boot_delay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoscalers::testutil::{default_sp, diamond};
    use crate::cloud::default_catalog;

    #[test]
    fn fresh_diamond() {
        let w = diamond();
        let sp = default_sp(&w);
        assert_eq!(sp.period_tasks.len(), 4);
        assert!((0..5).all(|i| sp.x_min(i) == 0));
        assert_eq!(sp.ready_count(), 1);
        let names: Vec<&str> = sp.period_tasks.iter().map(|t| w.task(t.task).id.as_str()).collect();
        // t3 is critical, t2 has slack
        assert_eq!(names, ["t1", "t3", "t2", "t4"]);
        assert_eq!(sp.period_tasks[3].period_parents, vec![2, 1]);
    }

    #[test]
    fn running_task_feeds_minimum_counts() {
        let mut w = diamond();
        let t1 = w.id_of("t1").unwrap();
        w.start_task(t1, 0.0, 50.0).unwrap();
        let mut sp = default_sp(&w);
        let pool = vec![PoolInstance {
            id: 0,
            type_idx: 1,
            pricing: PricingModel::OnDemand,
            bid: None,
            busy: true,
            slot_free: vec![50.0],
        }];
        sp = build_subproblem(
            &w,
            SubproblemInputs {
                now: 0.0,
                catalog: sp.catalog.clone(),
                spot_prices: sp.spot_prices.clone(),
                oob_model: sp.oob_model.clone(),
                budget: 1.0,
                x_max: vec![20; 5],
                pool,
                boot_delay: 0.0,
            },
        );
        assert_eq!(sp.x_min(1), 1);
        assert_eq!(sp.period_tasks.len(), 3);
        assert!(sp.period_tasks.iter().all(|t| t.base_ready >= 50.0 || !t.period_parents.is_empty()));
        assert_eq!(sp.ready_count(), 0);
    }

    #[test]
    fn completed_workflow_has_empty_period() {
        let mut w = crate::workflow::parse_workflow(r#"{"name":"s","tasks":[{"id":"a","work_ecu_seconds":5}]}"#).unwrap();
        let a = w.id_of("a").unwrap();
        w.start_task(a, 0.0, 5.0).unwrap();
        w.complete_task(a, 5.0).unwrap();
        assert!(priority_order(&w, &default_catalog(), 5.0).is_empty());
    }
}
