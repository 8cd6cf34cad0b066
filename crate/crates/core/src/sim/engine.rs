use std::collections::VecDeque;

use super::events::{EventKind, EventQueue};
use super::schedule::{schedule_ect, SlotAvailability};
use super::{RunMetrics, SimConfig, SimEnv, SimError, StepRecord, TickRecord};
use crate::autoscalers::siaa::{siaa_schedule, FreeSlot};
use crate::autoscalers::{
    build_subproblem, priority_order, realize_plan, Autoscaler, DispatchMode, InstanceRef, PoolInstance,
    SubproblemInputs,
};
use crate::cloud::billing::ends_mid_hour;
use crate::cloud::{billable_hours, InstanceUsage, PricingModel, HOUR};
use crate::workflow::{TaskId, TaskState, Workflow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceState {
    Booting,
    Idle,
    Busy,
    /// Idle and due to stop at its next billing boundary.
    Terminating,
    Terminated,
}

#[derive(Debug, Clone, Default)]
struct Slot {
    running: Option<(TaskId, f64)>,
    queue: VecDeque<TaskId>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub id: usize,
    pub type_idx: usize,
    pub pricing: PricingModel,
    pub bid: Option<f64>,
    pub start: f64,
    pub ready_at: f64,
    pub end: Option<f64>,
    pub terminated_by_oob: bool,
    pub release_pending: bool,
    slots: Vec<Slot>,
    /// Price charged for each started hour.
    charges: Vec<f64>,
}

impl Instance {
    pub fn is_alive(&self) -> bool {
        self.end.is_none()
    }

    pub fn is_busy(&self) -> bool {
        self.slots.iter().any(|s| s.running.is_some())
    }

    pub fn state(&self, now: f64) -> InstanceState {
        if self.end.is_some() {
            InstanceState::Terminated
        } else if self.is_busy() {
            InstanceState::Busy
        } else if self.release_pending {
            InstanceState::Terminating
        } else if now < self.ready_at {
            InstanceState::Booting
        } else {
            InstanceState::Idle
        }
    }

    pub fn running_tasks(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.slots.iter().filter_map(|s| s.running.map(|r| r.0))
    }

    pub fn queued_tasks(&self, slot: usize) -> impl Iterator<Item = TaskId> + '_ {
        self.slots[slot].queue.iter().copied()
    }

    pub fn cost(&self) -> f64 {
        self.charges.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Event,
    Tick(usize),
    Finished,
}

#[derive(Debug, Clone)]
struct State {
    workflow: Workflow,
    env: SimEnv,
    config: SimConfig,
    dispatch: DispatchMode,
    now: f64,
    events: EventQueue,
    instances: Vec<Instance>,
    spot_price: Vec<Option<f64>>,
    spot_cursor: Vec<usize>,
    attempts: Vec<u32>,
    queued: Vec<bool>,
    ticks_enabled: bool,
    tick_count: usize,
    task_failures: u64,
    oob_errors: u64,
    fallbacks: u64,
    ticks: Vec<TickRecord>,
    steps: Vec<StepRecord>,
    finished: bool,
}

/// A workflow execution in progress.
pub struct Simulation {
    state: State,
    autoscaler: Option<Box<dyn Autoscaler>>,
}

impl Simulation {
    pub fn new(
        workflow: Workflow,
        autoscaler: Box<dyn Autoscaler>,
        env: SimEnv,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        let n = env.catalog.len();
        let tasks = workflow.len();
        let mut state = State {
            dispatch: autoscaler.dispatch_mode(),
            workflow,
            env,
            now: 0.0,
            events: EventQueue::default(),
            instances: Vec::new(),
            spot_price: vec![None; n],
            spot_cursor: vec![0; n],
            attempts: vec![0; tasks],
            queued: vec![false; tasks],
            ticks_enabled: true,
            tick_count: 0,
            task_failures: 0,
            oob_errors: 0,
            fallbacks: 0,
            ticks: Vec::new(),
            steps: Vec::new(),
            finished: false,
            config,
        };
        let offset = state.config.trace_offset;
        for i in 0..n {
            let Some(series) = state.env.trace.series(&state.env.catalog[i].name) else {
                continue;
            };
            let cursor = series.partition_point(|p| p.time <= offset);
            state.spot_price[i] = cursor.checked_sub(1).map(|c| series[c].price);
            state.spot_cursor[i] = cursor;
            state.push_next_price(i);
        }
        for init in state.config.initial_pool.clone() {
            let i = state
                .env
                .catalog
                .iter()
                .position(|it| it.name == init.instance_type)
                .ok_or_else(|| SimError::UnknownInstanceType(init.instance_type.clone()))?;
            let bid = match init.pricing {
                PricingModel::OnDemand => None,
                PricingModel::Spot => Some(init.bid.or(state.spot_price[i]).unwrap_or(state.env.catalog[i].on_demand_price)),
            };
            state.acquire(i, init.pricing, bid);
        }
        state.events.push(0.0, EventKind::AutoscaleTick);
        Ok(Simulation { state, autoscaler: Some(autoscaler) })
    }

    /// Copy of the current state that runs on without further autoscaling.
    pub fn fork_without_ticks(&self) -> Simulation {
        let mut state = self.state.clone();
        state.ticks_enabled = false;
        Simulation { state, autoscaler: None }
    }

    pub fn set_ticks_enabled(&mut self, enabled: bool) {
        self.state.ticks_enabled = enabled && self.autoscaler.is_some();
    }

    pub fn now(&self) -> f64 {
        self.state.now
    }

    pub fn workflow(&self) -> &Workflow {
        &self.state.workflow
    }

    pub fn instances(&self) -> &[Instance] {
        &self.state.instances
    }

    pub fn ticks(&self) -> &[TickRecord] {
        &self.state.ticks
    }

    pub fn is_finished(&self) -> bool {
        self.state.finished
    }

    pub fn current_spot_price(&self, type_idx: usize) -> Option<f64> {
        self.state.spot_price[type_idx]
    }

    /// Processes the next event.
    pub fn step(&mut self) -> Result<StepOutcome, SimError> {
        let st = &mut self.state;
        if st.finished {
            return Ok(StepOutcome::Finished);
        }
        let Some(ev) = st.events.pop() else {
            return Err(SimError::Stalled {
                remaining: st.workflow.len() - st.workflow.completed_count(),
            });
        };
        if ev.time > st.config.max_time {
            return Err(SimError::Timeout { limit: st.config.max_time });
        }
        debug_assert!(ev.time >= st.now, "event causality");
        st.now = ev.time;
        let mut outcome = StepOutcome::Event;
        match ev.kind {
            EventKind::SpotPriceChange { type_idx, price } => {
                st.spot_cursor[type_idx] += 1;
                st.push_next_price(type_idx);
                st.apply_spot_price_change(type_idx, price)?;
            }
            EventKind::HourBoundary { instance, hour } => st.hour_boundary(instance, hour),
            EventKind::TaskFinish { instance, slot, task, attempt } => {
                st.task_finish(instance, slot, task, attempt)?;
            }
            EventKind::InstanceReady { .. } => {}
            EventKind::AutoscaleTick => {
                if st.ticks_enabled {
                    let autoscaler = self.autoscaler.as_mut().expect("ticks need an autoscaler");
                    let index = st.tick(autoscaler.as_mut())?;
                    outcome = StepOutcome::Tick(index);
                }
            }
        }
        if !st.finished {
            st.try_start()?;
            st.dispatch()?;
            st.try_start()?;
        }
        if st.events.peek_time() != Some(st.now) || st.finished {
            st.record_step();
        }
        Ok(if st.finished { StepOutcome::Finished } else { outcome })
    }

    pub fn run(mut self) -> Result<RunMetrics, SimError> {
        while self.step()? != StepOutcome::Finished {}
        Ok(self.metrics())
    }

    pub fn metrics(&self) -> RunMetrics {
        let st = &self.state;
        let count = |p: PricingModel| st.instances.iter().filter(|i| i.pricing == p).count() as u64;
        RunMetrics {
            makespan: if st.finished { st.now } else { f64::NAN },
            total_cost: st.instances.iter().map(Instance::cost).sum(),
            task_failures: st.task_failures,
            oob_errors: st.oob_errors,
            instances_on_demand: count(PricingModel::OnDemand),
            instances_spot: count(PricingModel::Spot),
            fallbacks: st.fallbacks,
            ticks: st.ticks.clone(),
            steps: st.steps.clone(),
            usage: st
                .instances
                .iter()
                .map(|i| InstanceUsage {
                    instance_type: st.env.catalog[i.type_idx].clone(),
                    pricing: i.pricing,
                    bid: i.bid,
                    start: i.start,
                    end: i.end.unwrap_or(st.now),
                    terminated_by_oob: i.terminated_by_oob,
                })
                .collect(),
        }
    }

    /// Applies a new market price for a type, terminating every spot
    /// instance of that type whose bid it exceeds.
    pub fn apply_spot_price_change(&mut self, type_idx: usize, price: f64) -> Result<(), SimError> {
        self.state.apply_spot_price_change(type_idx, price)
    }
}

impl State {
    fn push_next_price(&mut self, i: usize) {
        let series = self.env.trace.series(&self.env.catalog[i].name).expect("type has a series");
        if let Some(p) = series.get(self.spot_cursor[i]) {
            self.events.push(
                p.time - self.config.trace_offset,
                EventKind::SpotPriceChange { type_idx: i, price: p.price },
            );
        }
    }

    fn acquire(&mut self, type_idx: usize, pricing: PricingModel, bid: Option<f64>) -> Option<usize> {
        let it = &self.env.catalog[type_idx];
        let price = match pricing {
            PricingModel::OnDemand => it.on_demand_price,
            PricingModel::Spot => self.spot_price[type_idx]?,
        };
        let id = self.instances.len();
        let now = self.now;
        self.instances.push(Instance {
            id,
            type_idx,
            pricing,
            bid,
            start: now,
            ready_at: now + self.config.boot_delay,
            end: None,
            terminated_by_oob: false,
            release_pending: false,
            slots: vec![Slot::default(); it.vcpu as usize],
            charges: vec![price],
        });
        self.events.push(now + HOUR, EventKind::HourBoundary { instance: id, hour: 1 });
        if self.config.boot_delay > 0.0 {
            self.events.push(now + self.config.boot_delay, EventKind::InstanceReady { instance: id });
        }
        Some(id)
    }

    fn terminate(&mut self, id: usize, oob: bool) -> Result<(), SimError> {
        let now = self.now;
        let inst = &mut self.instances[id];
        debug_assert!(inst.is_alive());
        inst.end = Some(now);
        inst.terminated_by_oob = oob;
        inst.release_pending = false;
        let mut hours = billable_hours(inst.start, now) as usize;
        if oob && ends_mid_hour(inst.start, now) {
            hours -= 1;
        }
        inst.charges.truncate(hours);
        let mut failed = Vec::new();
        for slot in &mut inst.slots {
            if let Some((task, _)) = slot.running.take() {
                failed.push(task);
            }
            slot.queue.clear();
        }
        for task in failed {
            self.workflow.fail_task(task)?;
            self.attempts[task.0] += 1;
            self.task_failures += 1;
        }
        Ok(())
    }

    fn clear_queues(&mut self) {
        for inst in &mut self.instances {
            for slot in &mut inst.slots {
                slot.queue.clear();
            }
        }
        self.queued.iter_mut().for_each(|q| *q = false);
    }

    fn apply_spot_price_change(&mut self, type_idx: usize, price: f64) -> Result<(), SimError> {
        self.spot_price[type_idx] = Some(price);
        let victims: Vec<usize> = self
            .instances
            .iter()
            .filter(|i| {
                i.is_alive()
                    && i.type_idx == type_idx
                    && i.pricing == PricingModel::Spot
                    && i.bid.is_some_and(|b| price > b)
            })
            .map(|i| i.id)
            .collect();
        for &id in &victims {
            self.terminate(id, true)?;
            self.oob_errors += 1;
        }
        if !victims.is_empty() {
            self.clear_queues();
        }
        Ok(())
    }

    fn on_boundary(&self, inst: &Instance) -> bool {
        let elapsed = self.now - inst.start;
        let rem = elapsed % HOUR;
        elapsed > 0.0 && (rem < 1e-9 || HOUR - rem < 1e-9)
    }

    fn hour_boundary(&mut self, id: usize, hour: u64) {
        let inst = &self.instances[id];
        if !inst.is_alive() {
            return;
        }
        if inst.release_pending && !inst.is_busy() {
            // non-OOB termination exactly on the boundary bills no new hour
            self.terminate(id, false).expect("idle instance has no tasks to fail");
            return;
        }
        let price = match inst.pricing {
            PricingModel::OnDemand => self.env.catalog[inst.type_idx].on_demand_price,
            PricingModel::Spot => self.spot_price[inst.type_idx].expect("spot instance has a market"),
        };
        let next = inst.start + (hour + 1) as f64 * HOUR;
        self.instances[id].charges.push(price);
        self.events.push(next, EventKind::HourBoundary { instance: id, hour: hour + 1 });
    }

    fn task_finish(&mut self, id: usize, slot: usize, task: TaskId, attempt: u32) -> Result<(), SimError> {
        if self.attempts[task.0] != attempt || self.instances[id].slots[slot].running.map(|r| r.0) != Some(task) {
            return Ok(());
        }
        self.instances[id].slots[slot].running = None;
        self.workflow.complete_task(task, self.now)?;
        if self.workflow.is_complete() {
            let alive: Vec<usize> = self.instances.iter().filter(|i| i.is_alive()).map(|i| i.id).collect();
            for id in alive {
                self.terminate(id, false)?;
            }
            self.finished = true;
        }
        Ok(())
    }

    fn start(&mut self, id: usize, slot: usize, task: TaskId) -> Result<(), SimError> {
        let now = self.now;
        let inst = &self.instances[id];
        let finish = now + self.workflow.task(task).work / self.env.catalog[inst.type_idx].ecu_per_core;
        self.workflow.start_task(task, now, finish)?;
        self.instances[id].slots[slot].running = Some((task, finish));
        let attempt = self.attempts[task.0];
        self.events.push(finish, EventKind::TaskFinish { instance: id, slot, task, attempt });
        Ok(())
    }

    /// Starts every queue head that is ready on a free slot.
    fn try_start(&mut self) -> Result<(), SimError> {
        for id in 0..self.instances.len() {
            let inst = &self.instances[id];
            if !inst.is_alive() || inst.ready_at > self.now {
                continue;
            }
            for slot in 0..inst.slots.len() {
                let s = &self.instances[id].slots[slot];
                if s.running.is_some() {
                    continue;
                }
                let Some(&head) = s.queue.front() else {
                    continue;
                };
                if self.workflow.state(head) != TaskState::Ready {
                    continue;
                }
                self.instances[id].slots[slot].queue.pop_front();
                self.queued[head.0] = false;
                self.start(id, slot, head)?;
            }
        }
        Ok(())
    }

    /// Places ready tasks that no plan covers.
    fn dispatch(&mut self) -> Result<(), SimError> {
        let pending: Vec<TaskId> = self
            .workflow
            .task_ids()
            .filter(|&t| self.workflow.state(t) == TaskState::Ready && !self.queued[t.0])
            .collect();
        if pending.is_empty() {
            return Ok(());
        }
        let order: Vec<TaskId> = priority_order(&self.workflow, &self.env.catalog, self.now)
            .into_iter()
            .filter(|t| self.workflow.state(*t) == TaskState::Ready && !self.queued[t.0])
            .collect();
        let now = self.now;
        match self.dispatch {
            DispatchMode::QueuedEct => {
                let mut keys = Vec::new();
                let mut avail = Vec::new();
                for inst in self.instances.iter().filter(|i| i.is_alive() && !i.release_pending) {
                    let ecu = self.env.catalog[inst.type_idx].ecu_per_core;
                    for (k, s) in inst.slots.iter().enumerate() {
                        let base = s.running.map_or(now, |r| r.1).max(inst.ready_at).max(now);
                        let backlog: f64 = s.queue.iter().map(|t| self.workflow.task(*t).work / ecu).sum();
                        keys.push((inst.id, k));
                        avail.push(SlotAvailability { free_at: base + backlog, ecu_per_core: ecu });
                    }
                }
                let tasks: Vec<(TaskId, f64, f64)> =
                    order.iter().map(|&t| (t, self.workflow.task(t).work, now)).collect();
                for (task, k) in schedule_ect(&tasks, &mut avail) {
                    let (id, slot) = keys[k];
                    self.instances[id].slots[slot].queue.push_back(task);
                    self.queued[task.0] = true;
                }
            }
            DispatchMode::FreeSlotsOnDemandFirst => {
                let mut free = Vec::new();
                for inst in self
                    .instances
                    .iter()
                    .filter(|i| i.is_alive() && !i.release_pending && i.ready_at <= now)
                {
                    for (k, s) in inst.slots.iter().enumerate() {
                        if s.running.is_none() && s.queue.is_empty() {
                            free.push(FreeSlot {
                                instance: inst.id,
                                slot: k,
                                ecu_per_core: self.env.catalog[inst.type_idx].ecu_per_core,
                                pricing: inst.pricing,
                            });
                        }
                    }
                }
                let tasks: Vec<(TaskId, f64)> = order.iter().map(|&t| (t, self.workflow.task(t).work)).collect();
                for (task, slot) in siaa_schedule(&tasks, &free) {
                    self.start(slot.instance, slot.slot, task)?;
                }
            }
        }
        Ok(())
    }

    fn tick(&mut self, autoscaler: &mut dyn Autoscaler) -> Result<usize, SimError> {
        let index = self.tick_count;
        self.tick_count += 1;
        let now = self.now;
        if !self.env.trace.is_empty() && now + self.config.trace_offset > self.env.trace.end() {
            return Err(SimError::TraceExhausted { time: now });
        }
        let pool: Vec<PoolInstance> = self
            .instances
            .iter()
            .filter(|i| i.is_alive())
            .map(|i| PoolInstance {
                id: i.id,
                type_idx: i.type_idx,
                pricing: i.pricing,
                bid: i.bid,
                busy: i.is_busy(),
                slot_free: i.slots.iter().map(|s| s.running.map_or(now.max(i.ready_at), |r| r.1)).collect(),
            })
            .collect();
        let n = self.env.catalog.len();
        let sp = build_subproblem(
            &self.workflow,
            SubproblemInputs {
                now,
                catalog: self.env.catalog.clone(),
                spot_prices: self.spot_price.clone(),
                oob_model: self.env.oob_model.clone(),
                budget: self.config.budget,
                x_max: vec![self.config.x_max; n],
                pool,
                boot_delay: self.config.boot_delay,
            },
        );
        let decision = autoscaler.decide(&sp, index)?;
        if decision.fallback {
            self.fallbacks += 1;
        }
        let (mut acquired, mut released) = (0, 0);
        if let Some(plan) = &decision.plan {
            let realization = realize_plan(&sp, plan);
            let mut new_ids = Vec::with_capacity(realization.acquire.len());
            for req in &realization.acquire {
                let id = self.acquire(req.type_idx, req.pricing, req.bid);
                acquired += usize::from(id.is_some());
                new_ids.push(id);
            }
            let ids: Vec<Option<usize>> = realization
                .instances
                .iter()
                .map(|p| match p.instance {
                    InstanceRef::Existing(id) => Some(id),
                    InstanceRef::New(k) => new_ids[k],
                })
                .collect();
            for id in ids.iter().flatten() {
                self.instances[*id].release_pending = false;
            }
            for &id in &realization.release {
                released += 1;
                self.instances[id].release_pending = true;
                if self.on_boundary(&self.instances[id]) {
                    self.terminate(id, false)?;
                }
            }
            if let Some(queues) = &decision.queues {
                self.clear_queues();
                for ((k, slot), queue) in realization.slots().into_iter().zip(queues) {
                    let Some(id) = ids[k] else { continue };
                    for &task in queue {
                        self.instances[id].slots[slot].queue.push_back(task);
                        self.queued[task.0] = true;
                    }
                }
            }
        }
        self.ticks.push(TickRecord {
            index,
            time: now,
            plan: decision.plan,
            fallback: decision.fallback,
            violations: decision.violations,
            predicted_makespan: decision.predicted_makespan,
            period_tasks: sp.period_tasks.iter().map(|t| t.task.0).collect(),
            acquired,
            released,
        });
        self.events.push(now + self.config.period, EventKind::AutoscaleTick);
        Ok(index)
    }

    fn record_step(&mut self) {
        let alive = self.instances.iter().filter(|i| i.is_alive());
        let record = StepRecord {
            time: self.now,
            running_tasks: alive.clone().map(|i| i.running_tasks().count()).sum(),
            vcpus: alive.map(|i| self.env.catalog[i.type_idx].vcpu).sum(),
            accumulated_cost: self.instances.iter().map(Instance::cost).sum(),
        };
        match self.steps.last_mut() {
            Some(last) if last.time == record.time => *last = record,
            _ => self.steps.push(record),
        }
    }
}

/// Runs `workflow` to completion under `autoscaler`.
pub fn run_simulation(
    workflow: Workflow,
    autoscaler: Box<dyn Autoscaler>,
    env: SimEnv,
    config: SimConfig,
) -> Result<RunMetrics, SimError> {
    Simulation::new(workflow, autoscaler, env, config)?.run()
}
