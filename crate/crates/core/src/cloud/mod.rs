//! Cloud market model: instance catalog, pricing models, spot price traces,
//! out-of-bid probabilities and hourly billing.

pub mod billing;
pub mod catalog;
pub mod oob;
pub mod trace;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use billing::{billable_hours, instance_cost, InstanceUsage, HOUR};
pub use catalog::{default_catalog, find, load_catalog, InstanceType};
pub use oob::{estimate_oob_model, lookup_oob_probability, OobCurve, OobProbabilityModel};
pub use trace::{load_spot_trace, spot_price_at, PricePoint, SpotPriceTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingModel {
    OnDemand,
    Spot,
}

impl fmt::Display for PricingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PricingModel::OnDemand => "on_demand",
            PricingModel::Spot => "spot",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("timestamps for `{instance_type}` are not strictly increasing at t={time}")]
    NonMonotone { instance_type: String, time: f64 },
    #[error("non-positive price for `{instance_type}` at t={time}")]
    NonPositivePrice { instance_type: String, time: f64 },
    #[error("unknown instance type `{0}`")]
    UnknownType(String),
    #[error("no spot trace for `{0}`")]
    MissingTrace(String),
    #[error("t={time} precedes the trace of `{instance_type}`")]
    BeforeTraceStart { instance_type: String, time: f64 },
    #[error("empty bid grid for `{0}`")]
    EmptyGrid(String),
    #[error("bid grid for `{0}` is not strictly ascending")]
    UnsortedGrid(String),
    #[error("trace for `{instance_type}` spans {span} s, shorter than the {window} s window")]
    InsufficientSpan {
        instance_type: String,
        span: f64,
        window: f64,
    },
    #[error("invalid instance type: {0}")]
    InvalidInstanceType(String),
}
