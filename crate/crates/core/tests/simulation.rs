use std::collections::BTreeMap;
use std::sync::Arc;

use spotflow_core::autoscalers::cmi::CmiAutoscaler;
use spotflow_core::cloud::{default_catalog, instance_cost, OobCurve, OobProbabilityModel, SpotPriceTrace};
use spotflow_core::moea::Hyperparameters;
use spotflow_core::sim::{SimConfig, SimEnv, Simulation, StepOutcome};
use spotflow_core::workflow::generate::{generate, Family};
use spotflow_core::workflow::TaskId;

fn env() -> (SimEnv, SpotPriceTrace) {
    let mut trace = SpotPriceTrace::new();
    let mut curves = BTreeMap::new();
    for it in default_catalog() {
        let p = it.on_demand_price;
        trace.push(&it.name, 0.0, 0.3 * p).unwrap();
        trace.push(&it.name, 1e7, 0.3 * p).unwrap();
        curves.insert(
            it.name.clone(),
            OobCurve { bids: vec![0.3 * p, 0.6 * p, p], probabilities: vec![0.5, 0.1, 0.0] },
        );
    }
    let env = SimEnv {
        catalog: Arc::new(default_catalog()),
        trace: Arc::new(trace.clone()),
        oob_model: Arc::new(OobProbabilityModel { curves }),
    };
    (env, trace)
}

#[test]
fn predicted_period_makespan_matches_execution() {
    let (env, trace) = env();
    let w = generate(Family::MontageLike, 50, 11).unwrap();
    let hp = Hyperparameters { max_evaluations: 1000, population_size: 40, seed: 4, ..Default::default() };
    let cfg = SimConfig { budget: 0.8, period: 900.0, ..SimConfig::default() };
    let mut sim = Simulation::new(w, Box::new(CmiAutoscaler::new(hp)), env, cfg).unwrap();
    let mut checked = 0;
    loop {
        match sim.step().unwrap() {
            StepOutcome::Finished => break,
            StepOutcome::Tick(i) => {
                let tick = sim.ticks()[i].clone();
                if tick.period_tasks.is_empty() {
                    continue;
                }
                let mut fork = sim.fork_without_ticks();
                while fork.step().unwrap() != StepOutcome::Finished {}
                let wf = fork.workflow();
                let start = tick
                    .period_tasks
                    .iter()
                    .map(|&t| wf.task(TaskId(t)).started_at().unwrap())
                    .fold(f64::INFINITY, f64::min);
                let end = tick
                    .period_tasks
                    .iter()
                    .map(|&t| wf.task(TaskId(t)).finished_at().unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                let predicted = tick.predicted_makespan.unwrap();
                assert!((end - start - predicted).abs() < 1e-6, "tick {i}: {} vs {predicted}", end - start);
                checked += 1;
            }
            StepOutcome::Event => {}
        }
    }
    assert!(checked >= 2);
    let m = sim.metrics();
    let billed: f64 = m.usage.iter().map(|u| instance_cost(u, &trace).unwrap()).sum();
    assert!((billed - m.total_cost).abs() < 1e-9);
}
