//! Workflow DAGs: the task model, file ingestion, duration estimation and the
//! earliest-start-time / slack estimates that both autoscalers consume.

pub mod generate;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::InstanceType;

/// Index of a task inside its [`Workflow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId(pub usize);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Execution state of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Waiting,
    Ready,
    Scheduled,
    Running,
    Completed,
    Failed,
}

impl TaskState {
    /// Whether `self -> next` is a legal transition. `Failed -> Ready` is the
    /// only backward edge.
    pub fn can_transition_to(self, next: TaskState) -> bool {
        use TaskState::*;
        matches!(
            (self, next),
            (Waiting, Ready)
                | (Ready, Scheduled)
                | (Scheduled, Running)
                | (Running, Completed)
                | (Running, Failed)
                | (Failed, Ready)
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WorkflowError {
    #[error("malformed workflow file: {0}")]
    Parse(String),
    #[error("workflow has no tasks")]
    Empty,
    #[error("duplicate task id `{0}`")]
    DuplicateTask(String),
    #[error("task `{task}` lists unknown parent `{parent}`")]
    DanglingEdge { task: String, parent: String },
    #[error("duplicate edge `{parent}` -> `{child}`")]
    DuplicateEdge { parent: String, child: String },
    #[error("task `{0}` has non-positive or non-finite work")]
    NonPositiveWork(String),
    #[error("dependency cycle through task `{0}`")]
    Cycle(String),
    #[error("illegal state transition {from:?} -> {to:?} for task `{task}`")]
    InvalidTransition {
        task: String,
        from: TaskState,
        to: TaskState,
    },
}

/// A single workflow task. `work` is measured in ECU-seconds, i.e. seconds on
/// a core rated at 1 ECU.
#[derive(Debug, Clone)]
pub struct Task {
    pub id: String,
    pub work: f64,
    pub parents: Vec<TaskId>,
    pub children: Vec<TaskId>,
    state: TaskState,
    started_at: Option<f64>,
    finished_at: Option<f64>,
    expected_finish: Option<f64>,
}

impl Task {
    pub fn state(&self) -> TaskState {
        self.state
    }

    /// Start time of the current (or last successful) execution.
    pub fn started_at(&self) -> Option<f64> {
        self.started_at
    }

    pub fn finished_at(&self) -> Option<f64> {
        self.finished_at
    }

    /// Scheduled finish of a running task on its actual instance.
    pub fn expected_finish(&self) -> Option<f64> {
        self.expected_finish
    }
}

/// On-disk workflow description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkflowFile {
    pub name: String,
    pub tasks: Vec<TaskEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskEntry {
    pub id: String,
    pub work_ecu_seconds: f64,
    #[serde(default)]
    pub parents: Vec<String>,
}

/// A validated, acyclic workflow together with the mutable execution state
/// of its tasks.
#[derive(Debug, Clone)]
pub struct Workflow {
    name: String,
    tasks: Vec<Task>,
    index: HashMap<String, TaskId>,
    edges: Vec<(TaskId, TaskId)>,
    topo: Vec<TaskId>,
}

/// Parses and validates a workflow file. Entry tasks start `Ready`, every
/// other task `Waiting`.
pub fn parse_workflow(text: &str) -> Result<Workflow, WorkflowError> {
    let file: WorkflowFile =
        serde_json::from_str(text).map_err(|e| WorkflowError::Parse(e.to_string()))?;
    Workflow::from_file(&file)
}

impl Workflow {
    pub fn from_file(file: &WorkflowFile) -> Result<Self, WorkflowError> {
        if file.tasks.is_empty() {
            return Err(WorkflowError::Empty);
        }
        let mut index = HashMap::with_capacity(file.tasks.len());
        for (i, entry) in file.tasks.iter().enumerate() {
            if !(entry.work_ecu_seconds.is_finite() && entry.work_ecu_seconds > 0.0) {
                return Err(WorkflowError::NonPositiveWork(entry.id.clone()));
            }
            if index.insert(entry.id.clone(), TaskId(i)).is_some() {
                return Err(WorkflowError::DuplicateTask(entry.id.clone()));
            }
        }

        let mut tasks: Vec<Task> = file
            .tasks
            .iter()
            .map(|e| Task {
                id: e.id.clone(),
                work: e.work_ecu_seconds,
                parents: Vec::with_capacity(e.parents.len()),
                children: Vec::new(),
                state: TaskState::Waiting,
                started_at: None,
                finished_at: None,
                expected_finish: None,
            })
            .collect();

        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (i, entry) in file.tasks.iter().enumerate() {
            for parent in &entry.parents {
                let p = *index.get(parent).ok_or_else(|| WorkflowError::DanglingEdge {
                    task: entry.id.clone(),
                    parent: parent.clone(),
                })?;
                if !seen.insert((p, TaskId(i))) {
                    return Err(WorkflowError::DuplicateEdge {
                        parent: parent.clone(),
                        child: entry.id.clone(),
                    });
                }
                tasks[i].parents.push(p);
                tasks[p.0].children.push(TaskId(i));
                edges.push((p, TaskId(i)));
            }
        }

        let topo = topological_order(&tasks)?;
        for t in &mut tasks {
            if t.parents.is_empty() {
                t.state = TaskState::Ready;
            }
        }

        Ok(Workflow {
            name: file.name.clone(),
            tasks,
            index,
            edges,
            topo,
        })
    }

    pub fn to_file(&self) -> WorkflowFile {
        WorkflowFile {
            name: self.name.clone(),
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskEntry {
                    id: t.id.clone(),
                    work_ecu_seconds: t.work,
                    parents: t.parents.iter().map(|p| self.tasks[p.0].id.clone()).collect(),
                })
                .collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id.0]
    }

    pub fn tasks(&self) -> impl Iterator<Item = (TaskId, &Task)> {
        self.tasks.iter().enumerate().map(|(i, t)| (TaskId(i), t))
    }

    pub fn task_ids(&self) -> impl Iterator<Item = TaskId> {
        (0..self.tasks.len()).map(TaskId)
    }

    pub fn id_of(&self, name: &str) -> Option<TaskId> {
        self.index.get(name).copied()
    }

    pub fn edges(&self) -> &[(TaskId, TaskId)] {
        &self.edges
    }

    /// Topological order, stable with respect to file order.
    pub fn topological_order(&self) -> &[TaskId] {
        &self.topo
    }

    pub fn state(&self, id: TaskId) -> TaskState {
        self.tasks[id.0].state
    }

    pub fn is_complete(&self) -> bool {
        self.tasks.iter().all(|t| t.state == TaskState::Completed)
    }

    pub fn completed_count(&self) -> usize {
        self.tasks
            .iter()
            .filter(|t| t.state == TaskState::Completed)
            .count()
    }

    pub fn parents_completed(&self, id: TaskId) -> bool {
        self.tasks[id.0]
            .parents
            .iter()
            .all(|p| self.tasks[p.0].state == TaskState::Completed)
    }

    /// Tasks whose parents have all completed and that are not already
    /// scheduled, running or completed.
    pub fn ready_tasks(&self) -> Vec<TaskId> {
        self.task_ids()
            .filter(|&id| {
                !matches!(
                    self.state(id),
                    TaskState::Scheduled | TaskState::Running | TaskState::Completed
                ) && self.parents_completed(id)
            })
            .collect()
    }

    /// Tasks that are neither running, scheduled nor completed.
    pub fn unscheduled_tasks(&self) -> Vec<TaskId> {
        self.task_ids()
            .filter(|&id| {
                matches!(
                    self.state(id),
                    TaskState::Waiting | TaskState::Ready | TaskState::Failed
                )
            })
            .collect()
    }

    pub fn set_state(&mut self, id: TaskId, next: TaskState) -> Result<(), WorkflowError> {
        let task = &self.tasks[id.0];
        if !task.state.can_transition_to(next) {
            return Err(WorkflowError::InvalidTransition {
                task: task.id.clone(),
                from: task.state,
                to: next,
            });
        }
        if next == TaskState::Ready && !task.parents.is_empty() {
            let ok = task
                .parents
                .iter()
                .all(|p| self.tasks[p.0].state == TaskState::Completed);
            if !ok {
                return Err(WorkflowError::InvalidTransition {
                    task: task.id.clone(),
                    from: task.state,
                    to: next,
                });
            }
        }
        self.tasks[id.0].state = next;
        Ok(())
    }

    /// `Ready -> Scheduled -> Running` in one step.
    pub fn start_task(
        &mut self,
        id: TaskId,
        now: f64,
        expected_finish: f64,
    ) -> Result<(), WorkflowError> {
        self.set_state(id, TaskState::Scheduled)?;
        self.set_state(id, TaskState::Running)?;
        let t = &mut self.tasks[id.0];
        t.started_at = Some(now);
        t.expected_finish = Some(expected_finish);
        Ok(())
    }

    /// Completes a running task and promotes children that became ready.
    /// Returns the promoted children.
    pub fn complete_task(&mut self, id: TaskId, now: f64) -> Result<Vec<TaskId>, WorkflowError> {
        self.set_state(id, TaskState::Completed)?;
        let t = &mut self.tasks[id.0];
        t.finished_at = Some(now);
        t.expected_finish = None;
        let children = t.children.clone();
        let mut promoted = Vec::new();
        for c in children {
            if self.tasks[c.0].state == TaskState::Waiting && self.parents_completed(c) {
                self.set_state(c, TaskState::Ready)?;
                promoted.push(c);
            }
        }
        Ok(promoted)
    }

    /// Fails a running task and requeues it as ready (full work, no
    /// checkpointing).
    pub fn fail_task(&mut self, id: TaskId) -> Result<(), WorkflowError> {
        self.set_state(id, TaskState::Failed)?;
        let t = &mut self.tasks[id.0];
        t.started_at = None;
        t.expected_finish = None;
        self.set_state(id, TaskState::Ready)
    }
}

fn topological_order(tasks: &[Task]) -> Result<Vec<TaskId>, WorkflowError> {
    let mut indegree: Vec<usize> = tasks.iter().map(|t| t.parents.len()).collect();
    let mut frontier: std::collections::VecDeque<usize> =
        (0..tasks.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(tasks.len());
    while let Some(i) = frontier.pop_front() {
        order.push(TaskId(i));
        for c in &tasks[i].children {
            indegree[c.0] -= 1;
            if indegree[c.0] == 0 {
                frontier.push_back(c.0);
            }
        }
    }
    if order.len() != tasks.len() {
        let culprit = (0..tasks.len()).find(|&i| indegree[i] > 0).unwrap_or(0);
        return Err(WorkflowError::Cycle(tasks[culprit].id.clone()));
    }
    Ok(order)
}

/// Single-core execution time of `task` on an instance of type `it`.
pub fn estimate_duration(task: &Task, it: &InstanceType) -> f64 {
    task.work / it.ecu_per_core
}

/// Earliest start time of every uncompleted task.
///
/// Ready tasks start at `now`; a waiting task starts once its last parent
/// finishes. Completed parents contribute their actual finish time, running
/// parents their scheduled finish on the instance they occupy.
pub fn earliest_start_times(
    w: &Workflow,
    durations: &BTreeMap<TaskId, f64>,
    now: f64,
) -> BTreeMap<TaskId, f64> {
    let (est, _) = est_and_finish(w, durations, now);
    est
}

fn est_and_finish(
    w: &Workflow,
    durations: &BTreeMap<TaskId, f64>,
    now: f64,
) -> (BTreeMap<TaskId, f64>, BTreeMap<TaskId, f64>) {
    let mut est = BTreeMap::new();
    let mut eft: Vec<f64> = vec![0.0; w.len()];
    for &id in w.topological_order() {
        let task = w.task(id);
        match task.state() {
            TaskState::Completed => {
                eft[id.0] = task.finished_at().unwrap_or(now);
            }
            TaskState::Running => {
                let start = task.started_at().unwrap_or(now);
                let finish = task
                    .expected_finish()
                    .unwrap_or_else(|| start + duration_of(durations, w, id));
                est.insert(id, start);
                eft[id.0] = finish;
            }
            _ => {
                let start = if w.parents_completed(id) {
                    now
                } else {
                    task.parents
                        .iter()
                        .map(|p| eft[p.0])
                        .fold(now, f64::max)
                };
                est.insert(id, start);
                eft[id.0] = start + duration_of(durations, w, id);
            }
        }
    }
    let finish = est.keys().map(|&id| (id, eft[id.0])).collect();
    (est, finish)
}

fn duration_of(durations: &BTreeMap<TaskId, f64>, w: &Workflow, id: TaskId) -> f64 {
    *durations
        .get(&id)
        .unwrap_or_else(|| panic!("no duration for uncompleted task `{}`", w.task(id).id))
}

/// Slack of every uncompleted task: how long it can be delayed without
/// delaying any child. Exit tasks are measured against the estimated finish
/// of the whole remaining workflow.
pub fn slack_times(
    w: &Workflow,
    durations: &BTreeMap<TaskId, f64>,
    now: f64,
) -> BTreeMap<TaskId, f64> {
    let (est, eft) = est_and_finish(w, durations, now);
    let deadline = eft.values().copied().fold(f64::NEG_INFINITY, f64::max);
    est.keys()
        .map(|&id| {
            let finish = eft[&id];
            let children = &w.task(id).children;
            let limit = if children.is_empty() {
                deadline
            } else {
                children
                    .iter()
                    .filter_map(|c| est.get(c))
                    .copied()
                    .fold(f64::INFINITY, f64::min)
            };
            (id, (limit - finish).max(0.0))
        })
        .collect()
}
