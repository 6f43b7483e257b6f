//! Domain types and stateless formulas shared by every scheduler.
//!
//! Rates are computed in nats internally; callers that want bits divide by
//! `ln 2`. The noise-rise budget `I` is treated as a whole-band egress power
//! budget in Watts, referenced to the total in-band noise power `N0 * B`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simnet::Deployment;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid {field}: {value} ({reason})")]
    InvalidValue {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("unknown base station {0}")]
    UnknownBaseStation(usize),
    #[error("allocations cover {got} cells, deployment has {expected}")]
    AllocationCount { got: usize, expected: usize },
}

fn check_finite_nonneg(field: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_nan() {
        return Err(ModelError::InvalidValue {
            field,
            value,
            reason: "NaN",
        });
    }
    if value < 0.0 || value.is_infinite() {
        return Err(ModelError::InvalidValue {
            field,
            value,
            reason: "must be finite and >= 0",
        });
    }
    Ok(())
}

fn check_positive(field: &'static str, value: f64) -> Result<(), ModelError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(ModelError::InvalidValue {
            field,
            value,
            reason: "must be finite and > 0",
        });
    }
    Ok(())
}

/// Per-user scheduling inputs seen by a single cell's scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserLink {
    pub id: usize,
    /// QoS gradient weight, dimensionless.
    pub weight: f64,
    /// Serving-link gain over budgeted noise-plus-interference power, 1/W.
    pub norm_sinr: f64,
    /// Sum of gains towards every non-serving base station.
    pub norm_interference: f64,
    /// Transmit power headroom in Watts. `None` means interference limited.
    #[serde(default)]
    pub max_power: Option<f64>,
}

impl UserLink {
    pub fn new(
        id: usize,
        weight: f64,
        norm_sinr: f64,
        norm_interference: f64,
    ) -> Result<Self, ModelError> {
        let link = UserLink {
            id,
            weight,
            norm_sinr,
            norm_interference,
            max_power: None,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn with_max_power(mut self, max_power: f64) -> Result<Self, ModelError> {
        check_positive("max_power", max_power)?;
        self.max_power = Some(max_power);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_finite_nonneg("weight", self.weight)?;
        check_finite_nonneg("norm_sinr", self.norm_sinr)?;
        check_positive("norm_interference", self.norm_interference)?;
        if let Some(p) = self.max_power {
            if !(p > 0.0) {
                return Err(ModelError::InvalidValue {
                    field: "max_power",
                    value: p,
                    reason: "must be > 0",
                });
            }
        }
        Ok(())
    }

    /// A user that can never contribute to the objective.
    pub fn is_degenerate(&self) -> bool {
        self.weight == 0.0 || self.norm_sinr == 0.0
    }
}

/// Per-cell schedule: bandwidth fractions, powers and (for the joint
/// solver) the dual variables of the budget and bandwidth constraints.
///
/// Heuristic schedulers leave both duals at zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Allocation {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Weighted sum rate in nats with the bandwidth factored out.
    pub objective: f64,
    pub iterations: usize,
}

impl Allocation {
    /// Everyone silent.
    pub fn idle(len: usize) -> Self {
        Allocation {
            x: vec![0.0; len],
            p: vec![0.0; len],
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn bandwidth_used(&self) -> f64 {
        self.x.iter().sum()
    }

    pub fn scheduled(&self) -> usize {
        self.x.iter().filter(|&&x| x > 0.0).count()
    }

    /// Checks the shared allocation invariants against a budget `I`.
    pub fn is_feasible(&self, links: &[UserLink], budget: f64, eps: f64) -> bool {
        if self.x.len() != links.len() || self.p.len() != links.len() {
            return false;
        }
        let nonneg = self
            .x
            .iter()
            .chain(self.p.iter())
            .all(|v| v.is_finite() && *v >= 0.0);
        let silent_when_idle = self.x.iter().zip(&self.p).all(|(&x, &p)| x > 0.0 || p == 0.0);
        let egress: f64 = links
            .iter()
            .zip(&self.p)
            .map(|(l, p)| l.norm_interference * p)
            .sum();
        nonneg
            && silent_when_idle
            && self.bandwidth_used() <= 1.0 + eps
            && egress <= budget * (1.0 + eps)
    }
}

/// Egress interference cap for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRiseBudget {
    pub target_db: f64,
    /// `I` in Watts.
    pub linear_budget: f64,
    /// In-band noise power `N0 * B` the target is referenced to.
    pub noise_power: f64,
}

impl NoiseRiseBudget {
    pub fn from_db(target_db: f64, n0_density: f64, bandwidth: f64) -> Result<Self, ModelError> {
        noise_rise_budget_from_db(target_db, n0_density, bandwidth)
    }

    /// Noise rise in dB seen by a receiver with `interference` Watts on top of the noise floor.
    pub fn noise_rise_db(&self, interference: f64) -> f64 {
        10.0 * ((self.noise_power + interference) / self.noise_power).log10()
    }
}

/// `I = N0 * B * (10^(dB/10) - 1)`.
pub fn noise_rise_budget_from_db(
    target_db: f64,
    n0_density: f64,
    bandwidth: f64,
) -> Result<NoiseRiseBudget, ModelError> {
    if !(target_db.is_finite() && target_db > 0.0) {
        return Err(ModelError::InvalidValue {
            field: "target_db",
            value: target_db,
            reason: "noise rise must be > 0 dB",
        });
    }
    check_positive("n0_density", n0_density)?;
    check_positive("bandwidth", bandwidth)?;
    let noise_power = n0_density * bandwidth;
    Ok(NoiseRiseBudget {
        target_db,
        linear_budget: noise_power * (10f64.powf(target_db / 10.0) - 1.0),
        noise_power,
    })
}

/// `B * x * ln(1 + p e / x)`, zero at `x = 0`.
pub fn shannon_rate(x: f64, p: f64, e: f64, bandwidth: f64) -> Result<f64, ModelError> {
    check_finite_nonneg("x", x)?;
    check_finite_nonneg("p", p)?;
    check_finite_nonneg("e", e)?;
    check_finite_nonneg("bandwidth", bandwidth)?;
    Ok(bandwidth * rate_term(x, p * e))
}

/// `x ln(1 + s / x)` with the continuous extension at `x = 0`.
#[inline]
pub(crate) fn rate_term(x: f64, signal: f64) -> f64 {
    if x <= 0.0 || signal <= 0.0 {
        0.0
    } else {
        x * (signal / x).ln_1p()
    }
}

/// Weighted sum rate `sum w_i x_i ln(1 + p_i e_i / x_i)` with `B` omitted.
pub fn objective(x: &[f64], p: &[f64], links: &[UserLink]) -> f64 {
    links
        .iter()
        .zip(x.iter().zip(p))
        .map(|(l, (&xi, &pi))| l.weight * rate_term(xi, pi * l.norm_sinr))
        .sum()
}

/// Interference per unit power from the serving gain and the downlink SIR,
/// assuming channel reciprocity.
pub fn normalized_interference(serving_gain: f64, downlink_sir: f64) -> Result<f64, ModelError> {
    check_positive("serving_gain", serving_gain)?;
    check_positive("downlink_sir", downlink_sir)?;
    Ok(serving_gain / downlink_sir)
}

/// `sum l_i p_i`.
pub fn egress_interference(powers: &[f64], norm_interferences: &[f64]) -> Result<f64, ModelError> {
    if powers.len() != norm_interferences.len() {
        return Err(ModelError::LengthMismatch {
            left: powers.len(),
            right: norm_interferences.len(),
        });
    }
    for &p in powers {
        check_finite_nonneg("power", p)?;
    }
    Ok(powers
        .iter()
        .zip(norm_interferences)
        .map(|(p, l)| p * l)
        .sum())
}

/// Total in-band interference received at `target_bs` from the transmitters
/// of every other cell. `allocations[k]` is ordered like
/// `deployment.members(k)`.
pub fn ingress_interference(
    deployment: &Deployment,
    allocations: &[Allocation],
    target_bs: usize,
) -> Result<f64, ModelError> {
    let cells = deployment.num_cells();
    if target_bs >= cells {
        return Err(ModelError::UnknownBaseStation(target_bs));
    }
    if allocations.len() != cells {
        return Err(ModelError::AllocationCount {
            got: allocations.len(),
            expected: cells,
        });
    }
    let mut total = 0.0;
    for (cell, alloc) in allocations.iter().enumerate() {
        if cell == target_bs {
            continue;
        }
        let members = deployment.members(cell);
        if alloc.p.len() != members.len() {
            return Err(ModelError::LengthMismatch {
                left: alloc.p.len(),
                right: members.len(),
            });
        }
        for (&ms, &p) in members.iter().zip(&alloc.p) {
            if p > 0.0 {
                total += deployment.gain(ms, target_bs) * p;
            }
        }
    }
    Ok(total)
}
