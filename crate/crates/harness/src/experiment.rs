//! Expands a config into seeded runs, executes them and persists records.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spotflow_core::autoscalers::cmi::CmiAutoscaler;
use spotflow_core::autoscalers::siaa::SiaaAutoscaler;
use spotflow_core::autoscalers::Autoscaler;
use spotflow_core::cloud::oob::estimate_for_catalog;
use spotflow_core::cloud::{default_catalog, load_catalog, load_spot_trace, InstanceType, SpotPriceTrace};
use spotflow_core::sim::{run_simulation, RunMetrics, SimConfig, SimEnv};
use spotflow_core::workflow::generate::generate;
use spotflow_core::workflow::{parse_workflow, Workflow};

use crate::config::{ExperimentConfig, TraceSource, WorkflowSource};
use crate::report::attach_l2;
use crate::synthetic::synthetic_trace;
use crate::HarnessError;

pub const RECORDS_FILE: &str = "records.ndjson";
pub const STEPS_DIR: &str = "steps";

/// Worker count from `SPOTFLOW_WORKERS`, else the machine's parallelism.
pub fn default_workers() -> usize {
    std::env::var("SPOTFLOW_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum StrategyPoint {
    Cmi,
    Siaa { spot_ratio: f64, confidence: f64 },
}

impl StrategyPoint {
    pub fn label(&self) -> String {
        match self {
            StrategyPoint::Cmi => "cmi".into(),
            StrategyPoint::Siaa { spot_ratio, confidence } => {
                format!("siaa-sr{spot_ratio:.2}-bmc{confidence:.2}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub point: StrategyPoint,
    pub repetition: usize,
    pub seed: u64,
}

impl RunSpec {
    pub fn run_id(&self) -> String {
        format!("{}-s{}", self.point.label(), self.seed)
    }
}

/// Scalar outcome of a run; per-step logs go to their own CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub makespan: f64,
    pub total_cost: f64,
    pub task_failures: u64,
    pub oob_errors: u64,
    pub instances_on_demand: u64,
    pub instances_spot: u64,
    pub fallbacks: u64,
    pub ticks: usize,
}

impl From<&RunMetrics> for RunSummary {
    fn from(m: &RunMetrics) -> Self {
        RunSummary {
            makespan: m.makespan,
            total_cost: m.total_cost,
            task_failures: m.task_failures,
            oob_errors: m.oob_errors,
            instances_on_demand: m.instances_on_demand,
            instances_spot: m.instances_spot,
            fallbacks: m.fallbacks,
            ticks: m.ticks.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub workflow: String,
    pub run_id: String,
    #[serde(flatten)]
    pub point: StrategyPoint,
    pub repetition: usize,
    pub seed: u64,
    /// Trace time at which the replay starts.
    pub trace_offset: f64,
    pub metrics: Option<RunSummary>,
    pub error: Option<String>,
    /// Normalized over all successful runs of the workflow.
    pub l2: Option<f64>,
}

/// Loaded inputs shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub workflow: Workflow,
    /// The trace from the split on, and a model trained before it.
    pub env: SimEnv,
    pub split: f64,
    pub trace_end: f64,
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

pub fn load_workflow(source: &WorkflowSource) -> Result<Workflow, HarnessError> {
    Ok(match source {
        WorkflowSource::File { path } => parse_workflow(&read(path)?)?,
        WorkflowSource::Generated { family, tasks, seed } => generate(*family, *tasks, *seed)?,
    })
}

pub fn load_catalog_or_default(path: Option<&Path>) -> Result<Vec<InstanceType>, HarnessError> {
    match path {
        Some(p) => Ok(load_catalog(&read(p)?)?),
        None => Ok(default_catalog()),
    }
}

/// Full trace and split timestamp.
pub fn load_trace(source: &TraceSource, catalog: &[InstanceType]) -> Result<(SpotPriceTrace, f64), HarnessError> {
    let (trace, split) = match source {
        TraceSource::File { path, split } => (load_spot_trace(&read(path)?)?, *split),
        TraceSource::Synthetic(spec) => (synthetic_trace(catalog, spec)?, spec.split()),
    };
    let (start, end) = (trace.start(), trace.end());
    if !(split > start && split < end) {
        return Err(HarnessError::SplitOutsideTrace { split, start, end });
    }
    Ok((trace, split))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Inputs, HarnessError> {
    let catalog = load_catalog_or_default(cfg.catalog.as_deref())?;
    let workflow = load_workflow(&cfg.workflow)?;
    let (trace, split) = load_trace(&cfg.trace, &catalog)?;
    let oob = estimate_for_catalog(&trace, split, &catalog, cfg.oob.window, cfg.oob.step, cfg.oob.grid_points)?;
    let test = trace.from_time(split);
    Ok(Inputs {
        workflow,
        trace_end: test.end(),
        env: SimEnv {
            catalog: Arc::new(catalog),
            trace: Arc::new(test),
            oob_model: Arc::new(oob),
        },
        split,
    })
}

/// Every (repetition, strategy point) pair, in canonical order.
pub fn plan_runs(cfg: &ExperimentConfig) -> Vec<RunSpec> {
    let mut points = Vec::new();
    if cfg.strategies.cmi.is_some() {
        points.push(StrategyPoint::Cmi);
    }
    if let Some(grid) = &cfg.strategies.siaa {
        for &spot_ratio in &grid.spot_ratios {
            for &confidence in &grid.confidences {
                points.push(StrategyPoint::Siaa { spot_ratio, confidence });
            }
        }
    }
    (0..cfg.repetitions)
        .flat_map(|repetition| {
            let seed = cfg.base_seed + repetition as u64;
            points.iter().map(move |&point| RunSpec { point, repetition, seed })
        })
        .collect()
}

/// Replay start shared by all strategies at a seed: uniform over the first
/// half of the test portion, on a whole minute after the split.
pub fn replay_offset(seed: u64, split: f64, trace_end: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.gen_range(0.0..1.0);
    split + (u * (trace_end - split) / 2.0 / 60.0).floor() * 60.0
}

fn autoscaler_for(point: StrategyPoint, cfg: &ExperimentConfig, seed: u64) -> Box<dyn Autoscaler> {
    match point {
        StrategyPoint::Cmi => {
            let mut hp = cfg.strategies.cmi.clone().unwrap_or_default();
            hp.seed = seed;
            Box::new(CmiAutoscaler::new(hp))
        }
        StrategyPoint::Siaa { spot_ratio, confidence } => Box::new(SiaaAutoscaler::new(spot_ratio, confidence)),
    }
}

/// Runs one simulation; failures end up in the record.
pub fn execute_run(spec: &RunSpec, inputs: &Inputs, cfg: &ExperimentConfig) -> (RunRecord, Option<RunMetrics>) {
    let trace_offset = replay_offset(spec.seed, inputs.split, inputs.trace_end);
    let sim_cfg = SimConfig {
        budget: cfg.budget,
        x_max: cfg.x_max,
        period: cfg.period,
        boot_delay: cfg.boot_delay,
        trace_offset,
        ..SimConfig::default()
    };
    let result = run_simulation(
        inputs.workflow.clone(),
        autoscaler_for(spec.point, cfg, spec.seed),
        inputs.env.clone(),
        sim_cfg,
    );
    let (metrics, error) = match &result {
        Ok(m) => (Some(RunSummary::from(m)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let record = RunRecord {
        workflow: inputs.workflow.name().to_string(),
        run_id: spec.run_id(),
        point: spec.point,
        repetition: spec.repetition,
        seed: spec.seed,
        trace_offset,
        metrics,
        error,
        l2: None,
    };
    (record, result.ok())
}

pub fn record_line(record: &RunRecord) -> String {
    serde_json::to_string(record).expect("record serializes")
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| HarnessError::Record {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Replaces `path` with one line per record.
pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&record_line(r));
        text.push('\n');
    }
    let tmp = path.with_extension("ndjson.tmp");
    fs::write(&tmp, text).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

struct Sink {
    path: PathBuf,
    file: File,
}

impl Sink {
    fn append(&mut self, record: &RunRecord) -> Result<(), HarnessError> {
        writeln!(self.file, "{}", record_line(record))
            .and_then(|_| self.file.flush())
            .map_err(|e| HarnessError::io(&self.path, e))
    }
}

/// Runs every planned simulation on `workers` threads.
///
/// Records are appended to `records.ndjson` as runs complete, then the file
/// is rewritten in canonical order with L2 summaries attached.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<RunRecord>, HarnessError> {
    cfg.validate()?;
    let inputs = prepare(cfg)?;
    let specs = plan_runs(cfg);
    let out = &cfg.output_dir;
    let steps_dir = out.join(STEPS_DIR);
    fs::create_dir_all(&steps_dir).map_err(|e| HarnessError::io(&steps_dir, e))?;
    let records_path = out.join(RECORDS_FILE);
    let file = File::create(&records_path).map_err(|e| HarnessError::io(&records_path, e))?;
    let sink = Mutex::new(Sink {
        path: records_path.clone(),
        file,
    });

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::WorkerPool(e.to_string()))?;
    let mut records = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let (record, metrics) = execute_run(spec, &inputs, cfg);
                if let Some(m) = metrics {
                    let path = steps_dir.join(format!("{}.csv", record.run_id));
                    fs::write(&path, m.steps_csv()).map_err(|e| HarnessError::io(&path, e))?;
                }
                sink.lock().expect("sink poisoned").append(&record)?;
                Ok(record)
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    attach_l2(&mut records)?;
    write_records(&records_path, &records)?;
    Ok(records)
}
