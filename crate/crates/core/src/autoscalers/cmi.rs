//! The multi-objective genetic autoscaler: optimize (makespan, cost, errors
//! impact) with NSGA-II, pick the front member nearest the ideal point,
//! then realize the plan and queue the period tasks.

use std::convert::Infallible;

use super::{
    evaluate_constraints, model_schedule, normalized_violations, objective_cost, objective_errors_impact,
    objective_makespan, realize_plan, select_solution, tick_seed, Autoscaler, AutoscalerError,
    AutoscalingSubproblem, Decision, DispatchMode, ScalingPlan,
};
use crate::moea::{decode, nsga2_optimize, Evaluation, Hyperparameters, Problem, VariableSpec};

/// The decision space of one tick: `n` on-demand counts, `n` spot counts and
/// `n` bids. Bids are snapped down to the available bid levels: the current
/// price and every grid bid above it up to the on-demand price.
pub struct CmiProblem<'a> {
    sp: &'a AutoscalingSubproblem,
    specs: Vec<VariableSpec>,
    bid_levels: Vec<Vec<f64>>,
}

impl<'a> CmiProblem<'a> {
    pub fn new(sp: &'a AutoscalingSubproblem) -> Self {
        let n = sp.n();
        let mut bid_levels = Vec::with_capacity(n);
        for (i, it) in sp.catalog.iter().enumerate() {
            let price = it.on_demand_price;
            let levels = match (sp.spot_available(i), sp.spot_prices[i]) {
                (true, Some(current)) => {
                    let grid = &sp.oob_model.curve(&it.name).expect("checked by spot_available").bids;
                    std::iter::once(current)
                        .chain(grid.iter().copied().filter(|&g| g > current && g <= price))
                        .collect()
                }
                _ => vec![price],
            };
            bid_levels.push(levels);
        }
        let mut specs = Vec::with_capacity(3 * n);
        for i in 0..n {
            let low = f64::from(sp.busy_od[i]);
            specs.push(VariableSpec::integer(low, low.max(f64::from(sp.x_max[i]))));
        }
        for i in 0..n {
            let low = f64::from(sp.busy_s[i]);
            let high = if sp.spot_available(i) { low.max(f64::from(sp.x_max[i])) } else { low };
            specs.push(VariableSpec::integer(low, high));
        }
        for (i, it) in sp.catalog.iter().enumerate() {
            specs.push(VariableSpec::real(bid_levels[i][0], it.on_demand_price.max(bid_levels[i][0])));
        }
        CmiProblem { sp, specs, bid_levels }
    }

    pub fn bid_levels(&self, i: usize) -> &[f64] {
        &self.bid_levels[i]
    }

    /// Plan encoded by a decoded point.
    pub fn plan_from(&self, x: &[f64]) -> ScalingPlan {
        let n = self.sp.n();
        ScalingPlan {
            x_od: x[..n].iter().map(|v| *v as u32).collect(),
            x_s: x[n..2 * n].iter().map(|v| *v as u32).collect(),
            x_bid: x[2 * n..].to_vec(),
        }
    }

    /// Point encoding a plan whose bids are bid levels.
    pub fn point_of(&self, plan: &ScalingPlan) -> Vec<f64> {
        plan.x_od
            .iter()
            .chain(&plan.x_s)
            .map(|&c| f64::from(c))
            .chain(plan.x_bid.iter().copied())
            .collect()
    }

    pub fn objectives(&self, plan: &ScalingPlan) -> Vec<f64> {
        vec![
            objective_makespan(plan, self.sp),
            objective_cost(plan, self.sp),
            objective_errors_impact(plan, self.sp),
        ]
    }
}

impl Problem for CmiProblem<'_> {
    type Error = Infallible;

    fn variables(&self) -> &[VariableSpec] {
        &self.specs
    }

    fn decode(&self, genome: &[f64]) -> Vec<f64> {
        let n = self.sp.n();
        let mut x = decode(&self.specs, genome);
        for i in 0..n {
            let levels = &self.bid_levels[i];
            x[2 * n + i] = if x[n + i] == 0.0 {
                levels[0]
            } else {
                let k = levels.partition_point(|&l| l <= x[2 * n + i]);
                levels[k.saturating_sub(1)]
            };
        }
        x
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, Infallible> {
        let plan = self.plan_from(x);
        Ok(Evaluation {
            objectives: self.objectives(&plan),
            violations: normalized_violations(&plan, self.sp),
        })
    }
}

/// Busy instances only, plus the cheapest on-demand instance if that leaves
/// the pool empty.
pub fn fallback_plan(sp: &AutoscalingSubproblem) -> ScalingPlan {
    let mut plan = keep_busy_plan(sp);
    if plan.total_instances() == 0 {
        let cheapest = (0..sp.n())
            .min_by(|&a, &b| sp.catalog[a].on_demand_price.total_cmp(&sp.catalog[b].on_demand_price))
            .expect("non-empty catalog");
        plan.x_od[cheapest] = 1;
    }
    plan
}

fn keep_busy_plan(sp: &AutoscalingSubproblem) -> ScalingPlan {
    ScalingPlan {
        x_od: sp.busy_od.clone(),
        x_s: sp.busy_s.clone(),
        x_bid: sp
            .catalog
            .iter()
            .zip(&sp.spot_prices)
            .map(|(it, s)| s.map_or(it.on_demand_price, |s| s.min(it.on_demand_price)))
            .collect(),
    }
}

pub(crate) fn check_subproblem(sp: &AutoscalingSubproblem) -> Result<(), AutoscalerError> {
    let n = sp.n();
    if n == 0 {
        return Err(AutoscalerError::InvalidSubproblem("empty catalog".into()));
    }
    if !(sp.budget > 0.0) {
        return Err(AutoscalerError::InvalidSubproblem("budget must be positive".into()));
    }
    if [sp.spot_prices.len(), sp.x_max.len(), sp.busy_od.len(), sp.busy_s.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(AutoscalerError::InvalidSubproblem("per-type vectors differ from catalog size".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CmiAutoscaler {
    pub hp: Hyperparameters,
}

impl CmiAutoscaler {
    /// `hp.seed` is the run seed; each tick derives its own.
    pub fn new(hp: Hyperparameters) -> Self {
        CmiAutoscaler { hp }
    }

    /// Phases one and two: optimize and select. Returns the plan and whether
    /// it is the infeasibility fallback.
    pub fn choose_plan(&self, sp: &AutoscalingSubproblem, tick: usize) -> Result<(ScalingPlan, bool), AutoscalerError> {
        let problem = CmiProblem::new(sp);
        let hp = Hyperparameters { seed: tick_seed(self.hp.seed, tick), ..self.hp.clone() };
        let front = nsga2_optimize(&problem, &hp)?;
        if front.first().is_none_or(|i| !i.is_feasible()) {
            return Ok((fallback_plan(sp), true));
        }
        let chosen = select_solution(&front);
        Ok((problem.plan_from(&front[chosen].genome), false))
    }
}

impl Autoscaler for CmiAutoscaler {
    fn name(&self) -> String {
        "cmi".into()
    }

    fn dispatch_mode(&self) -> DispatchMode {
        DispatchMode::QueuedEct
    }

    fn decide(&mut self, sp: &AutoscalingSubproblem, tick: usize) -> Result<Decision, AutoscalerError> {
        check_subproblem(sp)?;
        let (plan, fallback) = if sp.period_tasks.is_empty() {
            (keep_busy_plan(sp), false)
        } else {
            self.choose_plan(sp, tick)?
        };
        let realization = realize_plan(sp, &plan);
        let schedule = model_schedule(sp, &realization);
        Ok(Decision {
            violations: evaluate_constraints(&plan, sp),
            plan: Some(plan),
            queues: Some(schedule.queues),
            fallback,
            predicted_makespan: Some(schedule.makespan),
        })
    }
}
