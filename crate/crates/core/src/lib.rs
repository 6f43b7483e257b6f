//! Uplink bandwidth and power scheduling under a per-cell noise-rise
//! (egress interference) budget.
//!
//! - [`model`]: domain types, rate and interference formulas.
//! - [`solver`]: the joint bandwidth/power optimum by alternating water-filling.
//! - [`density`]: scheduling under a per-user noise-rise density cap.
//! - [`baselines`]: fixed-power and target-SINR comparators.
//! - [`simnet`]: a multi-cell simulator built on COST-Hata path loss.

pub mod baselines;
pub mod density;
pub mod model;
pub mod simnet;
pub mod solver;
