use serde::{Deserialize, Serialize};

use super::{CloudError, InstanceType, PricingModel, SpotPriceTrace};

pub const HOUR: f64 = 3600.0;

// Float noise from summed durations must not open a new billing hour.
const BILLING_EPS: f64 = 1e-6;

/// Started hours in `[start, end]`; an empty interval bills nothing.
pub fn billable_hours(start: f64, end: f64) -> u64 {
    let span = end - start;
    if span <= 0.0 {
        return 0;
    }
    (((span - BILLING_EPS) / HOUR).ceil() as u64).max(1)
}

pub(crate) fn ends_mid_hour(start: f64, end: f64) -> bool {
    let span = end - start;
    if span <= 0.0 {
        return false;
    }
    let rem = span % HOUR;
    rem > BILLING_EPS && HOUR - rem > BILLING_EPS
}

/// Lifetime of one instance, in trace time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceUsage {
    pub instance_type: InstanceType,
    pub pricing: PricingModel,
    pub bid: Option<f64>,
    pub start: f64,
    pub end: f64,
    pub terminated_by_oob: bool,
}

impl InstanceUsage {
    pub fn shifted(&self, offset: f64) -> InstanceUsage {
        InstanceUsage {
            start: self.start + offset,
            end: self.end + offset,
            ..self.clone()
        }
    }
}

/// Cost of an instance lifetime.
///
/// On-demand hours are charged at the fixed price. Each started spot hour is
/// charged at the market price at the start of that hour; when the provider
/// terminates the instance (out-of-bid) the interrupted final hour is free.
pub fn instance_cost(usage: &InstanceUsage, trace: &SpotPriceTrace) -> Result<f64, CloudError> {
    assert!(usage.end >= usage.start, "usage ends before it starts");
    let hours = billable_hours(usage.start, usage.end);
    match usage.pricing {
        PricingModel::OnDemand => Ok(hours as f64 * usage.instance_type.on_demand_price),
        PricingModel::Spot => {
            let charged = if usage.terminated_by_oob && ends_mid_hour(usage.start, usage.end) {
                hours - 1
            } else {
                hours
            };
            let name = &usage.instance_type.name;
            if trace.series(name).is_none() {
                return Err(CloudError::MissingTrace(name.clone()));
            }
            (0..charged)
                .map(|h| trace.price_at(name, usage.start + h as f64 * HOUR))
                .sum()
        }
    }
}
