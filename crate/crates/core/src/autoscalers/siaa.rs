//! The spot-ratio heuristic baseline: split the budget between on-demand and
//! spot by a fixed ratio, buy capacity greedily for the ready tasks, and bid
//! the cheapest price whose out-of-bid probability stays under a threshold.

use super::cmi::check_subproblem;
use super::{Autoscaler, AutoscalerError, AutoscalingSubproblem, Decision, DispatchMode, ScalingPlan};
use crate::cloud::{InstanceType, OobProbabilityModel, PricingModel};
use crate::workflow::TaskId;

/// Smallest grid bid whose out-of-bid probability is at most `confidence`,
/// or the on-demand price if none qualifies.
pub fn siaa_bid(model: &OobProbabilityModel, it: &InstanceType, confidence: f64) -> f64 {
    model
        .curve(&it.name)
        .and_then(|c| {
            c.bids
                .iter()
                .zip(&c.probabilities)
                .find(|(_, p)| **p <= confidence)
                .map(|(b, _)| *b)
        })
        .unwrap_or(it.on_demand_price)
}

/// Target counts for the ready-task demand under a spot ratio `spot_ratio`
/// and bid confidence `confidence`.
pub fn siaa_scaling(sp: &AutoscalingSubproblem, spot_ratio: f64, confidence: f64) -> ScalingPlan {
    let n = sp.n();
    let mut plan = ScalingPlan::empty(n);
    let mut demand = sp.ready_count() as i64;

    let od_prices: Vec<Option<f64>> = sp.catalog.iter().map(|it| Some(it.on_demand_price)).collect();
    let spot_prices: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if !sp.spot_available(i) {
                return None;
            }
            let current = sp.spot_prices[i]?;
            let bid = siaa_bid(&sp.oob_model, &sp.catalog[i], confidence).max(current);
            plan.x_bid[i] = bid;
            Some(bid)
        })
        .collect();
    for i in 0..n {
        if spot_prices[i].is_none() {
            plan.x_bid[i] = sp.catalog[i].on_demand_price;
        }
    }

    let buy = |share: f64, prices: &[Option<f64>], counts: &mut Vec<u32>, demand: &mut i64| {
        let mut order: Vec<usize> = (0..n).filter(|&i| prices[i].is_some()).collect();
        let value = |i: usize| sp.catalog[i].ecu_total / prices[i].unwrap();
        order.sort_by(|&a, &b| value(b).total_cmp(&value(a)).then(a.cmp(&b)));
        let mut left = share;
        for i in order {
            let price = prices[i].unwrap();
            while *demand > 0 && price <= left + 1e-12 && counts[i] < sp.x_max[i] {
                counts[i] += 1;
                left -= price;
                *demand -= i64::from(sp.catalog[i].vcpu);
            }
        }
    };
    let mut x_od = vec![0; n];
    let mut x_s = vec![0; n];
    buy((1.0 - spot_ratio) * sp.budget, &od_prices, &mut x_od, &mut demand);
    buy(spot_ratio * sp.budget, &spot_prices, &mut x_s, &mut demand);

    for i in 0..n {
        let cap = sp.x_max[i].max(sp.x_min(i));
        plan.x_od[i] = x_od[i].max(sp.busy_od[i]);
        plan.x_s[i] = x_s[i].max(sp.busy_s[i]);
        while plan.count(i) > cap {
            if plan.x_s[i] > sp.busy_s[i] {
                plan.x_s[i] -= 1;
            } else {
                plan.x_od[i] -= 1;
            }
        }
    }
    if plan.total_instances() == 0 {
        let cheapest = (0..n)
            .min_by(|&a, &b| sp.catalog[a].on_demand_price.total_cmp(&sp.catalog[b].on_demand_price))
            .unwrap();
        plan.x_od[cheapest] = 1;
    }
    plan
}

/// A currently idle slot offered to the baseline's dispatcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSlot {
    pub instance: usize,
    pub slot: usize,
    pub ecu_per_core: f64,
    pub pricing: PricingModel,
}

/// Assigns tasks (ascending slack, with their work) to free slots: the
/// fastest free on-demand slot first, otherwise the fastest free spot slot.
/// Stops when tasks or slots run out.
pub fn siaa_schedule(tasks: &[(TaskId, f64)], slots: &[FreeSlot]) -> Vec<(TaskId, FreeSlot)> {
    let mut taken = vec![false; slots.len()];
    let mut out = Vec::new();
    for &(task, work) in tasks {
        let pick = |pricing: PricingModel| {
            (0..slots.len())
                .filter(|&k| !taken[k] && slots[k].pricing == pricing)
                .min_by(|&a, &b| {
                    (work / slots[a].ecu_per_core)
                        .total_cmp(&(work / slots[b].ecu_per_core))
                        .then(a.cmp(&b))
                })
        };
        let Some(k) = pick(PricingModel::OnDemand).or_else(|| pick(PricingModel::Spot)) else {
            break;
        };
        taken[k] = true;
        out.push((task, slots[k]));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SiaaAutoscaler {
    pub spot_ratio: f64,
    pub confidence: f64,
}

impl SiaaAutoscaler {
    pub fn new(spot_ratio: f64, confidence: f64) -> Self {
        assert!((0.0..=1.0).contains(&spot_ratio), "spot ratio outside [0, 1]");
        assert!(confidence > 0.0 && confidence <= 1.0, "confidence outside (0, 1]");
        SiaaAutoscaler { spot_ratio, confidence }
    }
}

impl Autoscaler for SiaaAutoscaler {
    fn name(&self) -> String {
        format!("siaa-sr{:.2}-bmc{:.2}", self.spot_ratio, self.confidence)
    }

    fn dispatch_mode(&self) -> DispatchMode {
        DispatchMode::FreeSlotsOnDemandFirst
    }

    fn decide(&mut self, sp: &AutoscalingSubproblem, _: usize) -> Result<Decision, AutoscalerError> {
        check_subproblem(sp)?;
        let plan = siaa_scaling(sp, self.spot_ratio, self.confidence);
        Ok(Decision {
            violations: super::evaluate_constraints(&plan, sp),
            plan: Some(plan),
            ..Decision::default()
        })
    }
}
