use crate::workflow::TaskId;

/// When a slot can take its next task, and how fast it runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotAvailability {
    pub free_at: f64,
    pub ecu_per_core: f64,
}

/// Earliest-completion-time assignment. Tasks, given as
/// `(id, work, ready time)`, are taken in order; each goes to the slot with
/// the smallest `max(free, ready) + work / ecu` (lowest index on ties) and
/// that slot's free time advances. Returns `(task, slot index)` pairs.
pub fn schedule_ect(tasks: &[(TaskId, f64, f64)], slots: &mut [SlotAvailability]) -> Vec<(TaskId, usize)> {
    let mut out = Vec::with_capacity(tasks.len());
    if slots.is_empty() {
        return out;
    }
    for &(task, work, ready) in tasks {
        let (best, finish) = slots
            .iter()
            .enumerate()
            .map(|(k, s)| (k, s.free_at.max(ready) + work / s.ecu_per_core))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap();
        slots[best].free_at = finish;
        out.push((task, best));
    }
    out
}
