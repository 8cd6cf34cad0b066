use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::workflow::TaskId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    SpotPriceChange { type_idx: usize, price: f64 },
    HourBoundary { instance: usize, hour: u64 },
    TaskFinish { instance: usize, slot: usize, task: TaskId, attempt: u32 },
    InstanceReady { instance: usize },
    AutoscaleTick,
}

impl EventKind {
    /// Same-time order: price changes, billing boundaries, completions,
    /// boots, then the autoscaler, which thus sees every failure and
    /// completion of its instant.
    pub fn priority(&self) -> u8 {
        match self {
            EventKind::SpotPriceChange { .. } => 0,
            EventKind::HourBoundary { .. } => 1,
            EventKind::TaskFinish { .. } => 2,
            EventKind::InstanceReady { .. } => 3,
            EventKind::AutoscaleTick => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub seq: u64,
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.priority().cmp(&self.kind.priority()))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: f64, kind: EventKind) {
        self.heap.push(SimEvent { time, kind, seq: self.next_seq });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}
