use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{AutoscalingSubproblem, ScalingPlan};
use crate::cloud::PricingModel;
use crate::workflow::TaskId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceRef {
    Existing(usize),
    /// Index into `Realization::acquire`.
    New(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedInstance {
    pub instance: InstanceRef,
    pub type_idx: usize,
    pub pricing: PricingModel,
    pub slot_free: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewInstance {
    pub type_idx: usize,
    pub pricing: PricingModel,
    pub bid: Option<f64>,
}

/// The concrete pool a plan leads to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Realization {
    /// Kept and new instances, grouped by type then pricing.
    pub instances: Vec<PlannedInstance>,
    pub acquire: Vec<NewInstance>,
    /// Surplus idle instances to retire at their next billing boundary.
    pub release: Vec<usize>,
}

impl Realization {
    /// `(instance position, slot)` for every slot, in queue order.
    pub fn slots(&self) -> Vec<(usize, usize)> {
        self.instances
            .iter()
            .enumerate()
            .flat_map(|(k, inst)| (0..inst.slot_free.len()).map(move |s| (k, s)))
            .collect()
    }
}

/// Maps target counts onto the current pool: busy instances always stay,
/// idle ones are reused (lowest id first), the rest is acquired, and idle
/// instances beyond the target are released.
pub fn realize_plan(sp: &AutoscalingSubproblem, plan: &ScalingPlan) -> Realization {
    let mut out = Realization::default();
    for (i, it) in sp.catalog.iter().enumerate() {
        for pricing in [PricingModel::OnDemand, PricingModel::Spot] {
            let target = match pricing {
                PricingModel::OnDemand => plan.x_od[i],
                PricingModel::Spot => plan.x_s[i],
            } as usize;
            let of_kind = sp.pool.iter().filter(|p| p.type_idx == i && p.pricing == pricing);
            let busy: Vec<_> = of_kind.clone().filter(|p| p.busy).collect();
            let idle: Vec<_> = of_kind.filter(|p| !p.busy).collect();
            for p in &busy {
                out.instances.push(PlannedInstance {
                    instance: InstanceRef::Existing(p.id),
                    type_idx: i,
                    pricing,
                    slot_free: p.slot_free.clone(),
                });
            }
            let room = target.saturating_sub(busy.len());
            let reuse = room.min(idle.len());
            for p in &idle[..reuse] {
                out.instances.push(PlannedInstance {
                    instance: InstanceRef::Existing(p.id),
                    type_idx: i,
                    pricing,
                    slot_free: p.slot_free.iter().map(|&f| f.max(sp.now)).collect(),
                });
            }
            out.release.extend(idle[reuse..].iter().map(|p| p.id));
            for _ in reuse..room {
                out.instances.push(PlannedInstance {
                    instance: InstanceRef::New(out.acquire.len()),
                    type_idx: i,
                    pricing,
                    slot_free: vec![sp.now + sp.boot_delay; it.vcpu as usize],
                });
                out.acquire.push(NewInstance {
                    type_idx: i,
                    pricing,
                    bid: (pricing == PricingModel::Spot).then_some(plan.x_bid[i]),
                });
            }
        }
    }
    out
}

/// Outcome of list-scheduling the period tasks onto a realized pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSchedule {
    /// Latest finish minus earliest start over the period tasks; infinite
    /// when tasks exist but no slot does.
    pub makespan: f64,
    /// Per slot of `Realization::slots`, the tasks in execution order.
    pub queues: Vec<Vec<TaskId>>,
    /// Start and finish per period task, parallel to `period_tasks`.
    pub starts: Vec<f64>,
    pub finishes: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct SlotEntry {
    free: f64,
    slot: usize,
}

impl PartialEq for SlotEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SlotEntry {}

impl PartialOrd for SlotEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SlotEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.free.total_cmp(&other.free).then(self.slot.cmp(&other.slot))
    }
}

/// Simulates earliest-completion-time list scheduling of the period tasks,
/// in priority order, onto the slots of `realization`. This is exactly what
/// the simulator executes when nothing fails.
pub fn model_schedule(sp: &AutoscalingSubproblem, realization: &Realization) -> ModelSchedule {
    let n = sp.n();
    let slots = realization.slots();
    let mut heaps: Vec<BinaryHeap<Reverse<SlotEntry>>> = vec![BinaryHeap::new(); n];
    for (k, &(inst, s)) in slots.iter().enumerate() {
        let planned = &realization.instances[inst];
        heaps[planned.type_idx].push(Reverse(SlotEntry { free: planned.slot_free[s], slot: k }));
    }
    let tasks = &sp.period_tasks;
    let mut queues = vec![Vec::new(); slots.len()];
    let mut starts = vec![f64::NAN; tasks.len()];
    let mut finishes = vec![f64::NAN; tasks.len()];
    if tasks.is_empty() {
        return ModelSchedule { makespan: 0.0, queues, starts, finishes };
    }
    if slots.is_empty() {
        return ModelSchedule { makespan: f64::INFINITY, queues, starts, finishes };
    }
    for (k, task) in tasks.iter().enumerate() {
        let ready = task
            .period_parents
            .iter()
            .map(|&p| finishes[p])
            .fold(task.base_ready, f64::max);
        let mut best: Option<(f64, f64, usize)> = None;
        for (i, heap) in heaps.iter().enumerate() {
            if let Some(Reverse(entry)) = heap.peek() {
                let start = entry.free.max(ready);
                let finish = start + task.work / sp.catalog[i].ecu_per_core;
                if best.is_none_or(|(_, f, _)| finish < f) {
                    best = Some((start, finish, i));
                }
            }
        }
        let (start, finish, i) = best.expect("at least one slot");
        let Reverse(entry) = heaps[i].pop().unwrap();
        heaps[i].push(Reverse(SlotEntry { free: finish, slot: entry.slot }));
        queues[entry.slot].push(task.task);
        starts[k] = start;
        finishes[k] = finish;
    }
    let first = starts.iter().copied().fold(f64::INFINITY, f64::min);
    let last = finishes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ModelSchedule { makespan: last - first, queues, starts, finishes }
}

/// Expected execution time of the period tasks under `plan`.
pub fn objective_makespan(plan: &ScalingPlan, sp: &AutoscalingSubproblem) -> f64 {
    model_schedule(sp, &realize_plan(sp, plan)).makespan
}
