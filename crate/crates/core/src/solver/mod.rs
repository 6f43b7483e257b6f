//! Optimal joint bandwidth and power scheduling for one cell.
//!
//! The problem maximizes `sum w_i x_i ln(1 + p_i e_i / x_i)` subject to
//! `sum x_i = 1` and `sum l_i p_i = I`. It is solved by alternating two
//! water-filling-like steps: powers for fixed shares ([`power_step`]) and
//! shares for fixed powers ([`bandwidth_step`]). Each step is an exact
//! maximization over its block, so the objective never decreases.
//!
//! A user that ends a power step with zero power would receive zero band in
//! the following bandwidth step and could never come back. While iterating,
//! shares are therefore floored at [`SolverConfig::epsilon_floor`]. Once the
//! floored iteration settles, users still sitting on the floor are dropped
//! and the iteration continues without a floor until it converges again.
//! The result is then checked against the optimality conditions by
//! [`kkt_residual`].
//!
//! Plain alternation converges linearly, and only slowly when the optimum
//! leaves users out, which is the usual case: generically at most two users
//! share the band. Once the iteration has settled below
//! [`SolverConfig::polish_threshold`], or has run for
//! [`SolverConfig::polish_after`] iterations, each iteration also tries an exact
//! solve of the optimality conditions on the current support
//! ([`solve_on_support`]); the first candidate that certifies without
//! lowering the objective ends the solve.

mod bandwidth;
mod kkt;
mod polish;
mod power;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, Allocation, UserLink};

pub use bandwidth::{bandwidth_step, lambda2_bounds, marginal_gap, shares_for_lambda2, solve_snr, BandwidthStepResult};
pub use kkt::kkt_residual;
pub use polish::solve_on_support;
pub use power::{power_step, PowerStepResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no feasible transmitter: every user has zero weight, zero SINR or zero band")]
    NoTransmitter,
    #[error("no users to schedule")]
    Empty,
    #[error("noise-rise budget must be finite and > 0, got {0}")]
    InvalidBudget(f64),
    #[error("input length mismatch: {x} shares for {links} users")]
    LengthMismatch { x: usize, links: usize },
    #[error("invalid user link: {0}")]
    InvalidLink(#[from] model::ModelError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("internal solver failure: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Accepted `|sum x - 1|` in the bandwidth multiplier search.
    pub tol_bandwidth: f64,
    /// Stop once the max-norm change of `(x, p)` between iterations is below this.
    pub tol_convergence: f64,
    /// A result certifies when its KKT residual is at most this.
    pub tol_kkt: f64,
    pub max_iterations: usize,
    /// Minimum share held by every candidate during the floored phase.
    pub epsilon_floor: f64,
    /// Record objective and residual after every iteration.
    pub trace: bool,
    /// Try the exact support solve once the change drops below
    /// `polish_threshold` or after `polish_after` iterations.
    pub polish: bool,
    pub polish_threshold: f64,
    pub polish_after: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_bandwidth: 1e-9,
            tol_convergence: 1e-8,
            tol_kkt: 1e-6,
            max_iterations: 200,
            epsilon_floor: 1e-6,
            trace: false,
            polish: true,
            polish_threshold: 1e-2,
            polish_after: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.tol_bandwidth) {
            return Err(SolverError::InvalidConfig("tol_bandwidth must be > 0"));
        }
        if !positive(self.tol_convergence) {
            return Err(SolverError::InvalidConfig("tol_convergence must be > 0"));
        }
        if !positive(self.tol_kkt) {
            return Err(SolverError::InvalidConfig("tol_kkt must be > 0"));
        }
        if !positive(self.epsilon_floor) || self.epsilon_floor >= 1.0 {
            return Err(SolverError::InvalidConfig("epsilon_floor must be in (0, 1)"));
        }
        if !(self.polish_threshold >= 0.0) {
            return Err(SolverError::InvalidConfig("polish_threshold must be >= 0"));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidConfig("max_iterations must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    Certified,
    Uncertified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// Max-norm change of `(x, p)` against the previous iteration.
    pub change: f64,
    pub kkt_residual: f64,
    pub floored: bool,
    pub polished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSolution {
    pub allocation: Allocation,
    pub kkt_residual: f64,
    pub certification: Certification,
    /// Whether the change criterion was met, or a polished point
    /// certified, before `max_iterations`.
    pub converged: bool,
    pub polished: bool,
    pub trace: Vec<IterationRecord>,
}

impl JointSolution {
    pub fn is_certified(&self) -> bool {
        self.certification == Certification::Certified
    }
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

/// Raises every candidate share to at least `floor` and renormalizes.
/// Returns whether any share was raised.
fn apply_floor(x: &mut [f64], candidates: &[usize], floor: f64) -> bool {
    let mut raised = false;
    for &i in candidates {
        if x[i] < floor {
            x[i] = floor;
            raised = true;
        }
    }
    if raised {
        let total: f64 = x.iter().sum();
        for v in x.iter_mut() {
            *v /= total;
        }
    }
    raised
}

/// Alternating water-filling for one cell under egress budget `budget`.
pub fn solve_joint(links: &[UserLink], budget: f64, config: &SolverConfig) -> Result<JointSolution, SolverError> {
    config.validate()?;
    if links.is_empty() {
        return Err(SolverError::Empty);
    }
    for l in links {
        l.validate()?;
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(SolverError::InvalidBudget(budget));
    }
    let candidates: Vec<usize> = (0..links.len()).filter(|&i| !links[i].is_degenerate()).collect();
    if candidates.is_empty() {
        return Err(SolverError::NoTransmitter);
    }

    let m = links.len();
    let mut x = vec![0.0; m];
    for &i in &candidates {
        x[i] = 1.0 / candidates.len() as f64;
    }
    let mut floored_phase = candidates.len() > 1;
    let mut floor_hit = false;
    if floored_phase {
        floor_hit = apply_floor(&mut x, &candidates, config.epsilon_floor);
    }

    let mut prev_x = x.clone();
    let mut prev_p = vec![0.0; m];
    let mut lambda2_hint = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iteration = 0;
    let mut last: Option<Allocation> = None;
    let mut polished = false;

    while iteration < config.max_iterations {
        iteration += 1;
        let ps = power_step(&x, links, budget)?;
        let bs = bandwidth::bandwidth_step_from(&ps.p, links, config.tol_bandwidth, lambda2_hint)?;
        lambda2_hint = Some(bs.lambda2);

        let change = if iteration == 1 {
            f64::INFINITY
        } else {
            max_change(&bs.x, &prev_x).max(max_change(&ps.p, &prev_p))
        };
        let alloc = Allocation {
            objective: model::objective(&bs.x, &ps.p, links),
            x: bs.x,
            p: ps.p,
            lambda1: ps.lambda1,
            lambda2: bs.lambda2,
            iterations: iteration,
        };
        if config.trace {
            trace.push(IterationRecord {
                iteration,
                objective: alloc.objective,
                change,
                kkt_residual: kkt_residual(&alloc, links, budget),
                floored: floored_phase,
                polished: false,
            });
        }
        if config.polish && (change <= config.polish_threshold || iteration >= config.polish_after) {
            if let Some(candidate) = try_polish(&alloc, links, budget, &candidates, config) {
                if config.trace {
                    trace.push(IterationRecord {
                        iteration,
                        objective: candidate.objective,
                        change: max_change(&candidate.x, &alloc.x).max(max_change(&candidate.p, &alloc.p)),
                        kkt_residual: kkt_residual(&candidate, links, budget),
                        floored: false,
                        polished: true,
                    });
                }
                last = Some(candidate);
                converged = true;
                polished = true;
                break;
            }
        }
        prev_x.clone_from(&alloc.x);
        prev_p.clone_from(&alloc.p);
        x.clone_from(&alloc.x);
        last = Some(alloc);

        if floored_phase {
            let settled = change <= config.tol_convergence;
            if settled {
                if !floor_hit {
                    converged = true;
                    break;
                }
                // Drop whoever still wants less than the floor and finish unfloored.
                for &i in &candidates {
                    if x[i] < config.epsilon_floor {
                        x[i] = 0.0;
                    }
                }
                let total: f64 = x.iter().sum();
                for v in x.iter_mut() {
                    *v /= total;
                }
                floored_phase = false;
                prev_x.clone_from(&x);
            } else {
                floor_hit = apply_floor(&mut x, &candidates, config.epsilon_floor);
            }
        } else if change <= config.tol_convergence {
            converged = true;
            break;
        }
    }

    let allocation = match last {
        Some(a) => a,
        None => return Err(SolverError::Internal("no iteration ran".into())),
    };
    let residual = kkt_residual(&allocation, links, budget);
    let certification = if converged && residual <= config.tol_kkt {
        Certification::Certified
    } else {
        log::debug!(
            "uncertified joint solve: {} users, residual {residual:e}, converged {converged}",
            links.len()
        );
        Certification::Uncertified
    };
    Ok(JointSolution {
        allocation,
        kkt_residual: residual,
        certification,
        converged,
        polished,
        trace,
    })
}

/// Exact solve on the support of `alloc`, kept only if it certifies and
/// does not lose objective.
fn try_polish(
    alloc: &Allocation,
    links: &[UserLink],
    budget: f64,
    candidates: &[usize],
    config: &SolverConfig,
) -> Option<Allocation> {
    let support: Vec<usize> = candidates.iter().copied().filter(|&i| alloc.x[i] > 0.0).collect();
    let mut candidate = solve_on_support(links, budget, &support)?;
    let slack = 1e-12 * alloc.objective.abs().max(1.0);
    if candidate.objective + slack < alloc.objective || kkt_residual(&candidate, links, budget) > config.tol_kkt {
        return None;
    }
    candidate.iterations = alloc.iterations;
    Some(candidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn link(w: f64, e: f64, l: f64) -> UserLink {
        UserLink::new(0, w, e, l).unwrap()
    }

    fn two_user_example() -> Vec<UserLink> {
        vec![link(1.1, 16.25, 4.0), link(9.4, 0.1, 1.0)]
    }

    #[test]
    fn two_user_example_optimum() {
        let sol = solve_joint(&two_user_example(), 4.0, &SolverConfig::default()).unwrap();
        let a = &sol.allocation;
        assert!((a.x[0] - 0.667419).abs() <= 1e-4, "x1 = {}", a.x[0]);
        assert!((a.p[0] - 0.315038).abs() <= 1e-4, "p1 = {}", a.p[0]);
        assert!((a.x[1] - 0.332581).abs() <= 1e-4);
        assert!((a.p[1] - 2.739848).abs() <= 1e-3);
        assert!(sol.is_certified(), "residual {}", sol.kkt_residual);
    }

    #[test]
    fn single_user_takes_everything() {
        let sol = solve_joint(&[link(3.0, 0.5, 2.0)], 5.0, &SolverConfig::default()).unwrap();
        assert_eq!(sol.allocation.x, vec![1.0]);
        assert_relative_eq!(sol.allocation.p[0], 2.5, max_relative = 1e-12);
        assert!(sol.is_certified());
    }

    #[test]
    fn degenerate_users_are_left_out() {
        let links = [link(1.0, 2.0, 1.0), link(0.0, 9.0, 1.0), link(4.0, 0.0, 1.0)];
        let sol = solve_joint(&links, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(sol.allocation.x[1], 0.0);
        assert_eq!(sol.allocation.x[2], 0.0);
        assert_eq!(sol.allocation.p[1], 0.0);
        assert_relative_eq!(sol.allocation.x[0], 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = SolverConfig::default();
        assert_eq!(solve_joint(&[], 1.0, &cfg), Err(SolverError::Empty));
        assert_eq!(
            solve_joint(&[link(1.0, 0.0, 1.0)], 1.0, &cfg),
            Err(SolverError::NoTransmitter)
        );
        assert!(matches!(
            solve_joint(&[link(1.0, 1.0, 1.0)], 0.0, &cfg),
            Err(SolverError::InvalidBudget(_))
        ));
        let bad = UserLink {
            id: 0,
            weight: 1.0,
            norm_sinr: 1.0,
            norm_interference: 0.0,
            max_power: None,
        };
        assert!(matches!(solve_joint(&[bad], 1.0, &cfg), Err(SolverError::InvalidLink(_))));
        let cfg = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            solve_joint(&[link(1.0, 1.0, 1.0)], 1.0, &cfg),
            Err(SolverError::InvalidConfig(_))
        ));
    }

    #[test]
    fn iteration_cap_yields_uncertified_result() {
        let cfg = SolverConfig {
            max_iterations: 1,
            ..SolverConfig::default()
        };
        let sol = solve_joint(&two_user_example(), 4.0, &cfg).unwrap();
        assert_eq!(sol.certification, Certification::Uncertified);
        assert!(!sol.converged);
        assert!(sol.allocation.is_feasible(&two_user_example(), 4.0, 1e-9));
    }

    #[test]
    fn trace_is_recorded_on_request() {
        let cfg = SolverConfig {
            trace: true,
            ..SolverConfig::default()
        };
        let sol = solve_joint(&two_user_example(), 4.0, &cfg).unwrap();
        // one record per iteration plus the accepted polish
        assert_eq!(sol.trace.len(), sol.allocation.iterations + usize::from(sol.polished));
        assert!(sol.trace.last().unwrap().kkt_residual <= 1e-6);
    }

    #[test]
    fn plain_alternation_reaches_the_same_optimum() {
        let cfg = SolverConfig {
            polish: false,
            trace: true,
            ..SolverConfig::default()
        };
        let sol = solve_joint(&two_user_example(), 4.0, &cfg).unwrap();
        assert!(!sol.polished);
        assert!(sol.is_certified(), "residual {}", sol.kkt_residual);
        assert!((sol.allocation.x[0] - 0.667419).abs() <= 1e-4);
        assert!((sol.allocation.p[0] - 0.315038).abs() <= 1e-4);
        for w in sol.trace.windows(2) {
            assert!(w[1].objective >= w[0].objective - 1e-10);
        }
    }

    #[test]
    fn polish_agrees_with_alternation() {
        let links = [link(2.0, 3.0, 1.0), link(1.5, 5.0, 2.0), link(1.0, 8.0, 3.0)];
        let plain = solve_joint(
            &links,
            2.0,
            &SolverConfig {
                polish: false,
                max_iterations: 5000,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        let fast = solve_joint(&links, 2.0, &SolverConfig::default()).unwrap();
        assert!(fast.is_certified());
        assert!(fast.allocation.iterations <= plain.allocation.iterations);
        assert!((fast.allocation.objective - plain.allocation.objective).abs() <= 1e-6 * plain.allocation.objective);
    }
}
