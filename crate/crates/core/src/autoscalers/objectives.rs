use super::{AutoscalingSubproblem, ScalingPlan};

/// Pessimistic hourly cost: spot instances are priced at their bid.
pub fn objective_cost(plan: &ScalingPlan, sp: &AutoscalingSubproblem) -> f64 {
    sp.catalog
        .iter()
        .enumerate()
        .map(|(i, it)| f64::from(plan.x_od[i]) * it.on_demand_price + f64::from(plan.x_s[i]) * plan.x_bid[i])
        .sum()
}

/// Expected number of vCPUs lost to out-of-bid terminations.
pub fn objective_errors_impact(plan: &ScalingPlan, sp: &AutoscalingSubproblem) -> f64 {
    sp.catalog
        .iter()
        .enumerate()
        .filter(|(i, _)| plan.x_s[*i] > 0)
        .map(|(i, it)| {
            let p = sp
                .oob_model
                .curve(&it.name)
                .map_or(1.0, |c| c.probability(plan.x_bid[i]));
            f64::from(plan.x_s[i]) * f64::from(it.vcpu) * p
        })
        .sum()
}

/// Raw constraint excesses, all zero iff `plan` is feasible:
/// `[budget, count bounds per type..., at least one instance, bid range per type...]`.
pub fn evaluate_constraints(plan: &ScalingPlan, sp: &AutoscalingSubproblem) -> Vec<f64> {
    let n = sp.n();
    let mut v = Vec::with_capacity(2 * n + 2);
    v.push((objective_cost(plan, sp) - sp.budget).max(0.0));
    for i in 0..n {
        let count = plan.count(i);
        let low = sp.x_min(i).saturating_sub(count);
        let high = count.saturating_sub(sp.x_max[i]);
        v.push(f64::from(low + high));
    }
    v.push(if plan.total_instances() == 0 { 1.0 } else { 0.0 });
    for (i, it) in sp.catalog.iter().enumerate() {
        if plan.x_s[i] == 0 {
            v.push(0.0);
            continue;
        }
        let bid = plan.x_bid[i];
        v.push(match sp.spot_prices[i] {
            Some(current) => (current - bid).max(0.0) + (bid - it.on_demand_price).max(0.0),
            None => it.on_demand_price,
        });
    }
    v
}

/// Constraint excesses on comparable scales: budget relative to the budget,
/// bids relative to the on-demand price, counts as is.
pub fn normalized_violations(plan: &ScalingPlan, sp: &AutoscalingSubproblem) -> Vec<f64> {
    let n = sp.n();
    let mut v = evaluate_constraints(plan, sp);
    v[0] /= sp.budget;
    for (i, it) in sp.catalog.iter().enumerate() {
        v[n + 2 + i] /= it.on_demand_price;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoscalers::testutil::{diamond, subproblem_for};
    use crate::cloud::{default_catalog, OobCurve};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn sp() -> AutoscalingSubproblem {
        let w = diamond();
        let mut sp = subproblem_for(&w, default_catalog(), 1.0);
        sp.spot_prices = vec![Some(0.010), Some(0.02), Some(0.1), Some(0.1), Some(0.1)];
        let mut model = (*sp.oob_model).clone();
        model.curves.insert(
            "c3.2xlarge".into(),
            OobCurve { bids: vec![0.1, 0.2, 0.42], probabilities: vec![0.3, 0.05, 0.0] },
        );
        sp.oob_model = Arc::new(model);
        sp
    }

    #[test]
    fn cost_examples() {
        let sp = sp();
        let mut p = ScalingPlan::empty(5);
        p.x_od[1] = 2;
        p.x_s[0] = 3;
        p.x_bid[0] = 0.010;
        assert!((objective_cost(&p, &sp) - 0.17).abs() < 1e-12);
        assert_eq!(objective_cost(&ScalingPlan::empty(5), &sp), 0.0);
        let mut p = ScalingPlan::empty(5);
        p.x_od[4] = 1;
        assert!((objective_cost(&p, &sp) - 0.56).abs() < 1e-12);
    }

    #[test]
    fn errors_impact_examples() {
        let sp = sp();
        let mut p = ScalingPlan::empty(5);
        p.x_s[2] = 2;
        p.x_bid[2] = 0.2;
        assert!((objective_errors_impact(&p, &sp) - 0.8).abs() < 1e-12);
        p.x_bid[2] = 0.42;
        assert_eq!(objective_errors_impact(&p, &sp), 0.0);
        p.x_s[2] = 0;
        p.x_od[2] = 3;
        assert_eq!(objective_errors_impact(&p, &sp), 0.0);
    }

    #[test]
    fn constraint_examples() {
        let sp = sp();
        let mut p = ScalingPlan::empty(5);
        p.x_od[1] = 2;
        p.x_s[0] = 3;
        p.x_bid[0] = 0.010;
        assert!(evaluate_constraints(&p, &sp).iter().all(|v| *v == 0.0));
        let empty = evaluate_constraints(&ScalingPlan::empty(5), &sp);
        assert_eq!(empty[6], 1.0);
        p.x_bid[0] = 0.005;
        let v = evaluate_constraints(&p, &sp);
        assert!((v[7] - 0.005).abs() < 1e-15);
        let mut over = ScalingPlan::empty(5);
        over.x_od[4] = 2;
        assert!((evaluate_constraints(&over, &sp)[0] - 0.12).abs() < 1e-12);
        over.x_od[4] = 21;
        assert_eq!(evaluate_constraints(&over, &sp)[5], 1.0);
    }

    proptest! {
        #[test]
        fn cost_monotone_and_impact_antitone(
            counts in prop::collection::vec(0u32..4, 10),
            bids in prop::collection::vec(0.0f64..0.42, 5),
            which in 0usize..5,
            bump in 0.0f64..0.1,
        ) {
            let sp = sp();
            let plan = ScalingPlan { x_od: counts[..5].to_vec(), x_s: counts[5..].to_vec(), x_bid: bids };
            let mut more = plan.clone();
            more.x_od[which] += 1;
            prop_assert!(objective_cost(&more, &sp) >= objective_cost(&plan, &sp));
            let mut more = plan.clone();
            more.x_s[which] += 1;
            prop_assert!(objective_cost(&more, &sp) >= objective_cost(&plan, &sp));
            let mut higher = plan.clone();
            higher.x_bid[which] += bump;
            prop_assert!(objective_cost(&higher, &sp) >= objective_cost(&plan, &sp));
            prop_assert!(objective_errors_impact(&higher, &sp) <= objective_errors_impact(&plan, &sp));
        }
    }
}
