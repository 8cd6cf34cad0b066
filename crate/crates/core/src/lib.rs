//! Workflow autoscaling on a simulated spot/on-demand cloud market.

pub mod cloud;
pub mod moea;
pub mod workflow;
pub mod autoscalers;
pub mod sim;
