use crate::model::{Allocation, UserLink};

use super::bandwidth::marginal_gap;

/// Max-norm violation of the optimality conditions of the joint problem.
///
/// Terms, each dimensionless:
/// - bandwidth constraint `|sum x - 1|`;
/// - budget constraint `|sum l p - I| / I` when anybody transmits;
/// - power stationarity `|w x e / (x + p e) - lambda1 l| / (lambda1 l)` for
///   transmitters, and dual feasibility `[w e - lambda1 l]^+ / (lambda1 l)`
///   for users holding band without power;
/// - bandwidth stationarity `|w f(p e / x) + lambda2| / w` for transmitters;
/// - for users with neither band nor power, the largest surplus
///   `max_a w ln(1 + a) - lambda1 l a / e + lambda2` over `a >= 0`, divided
///   by `w`, clipped at zero. A positive value means the user was wrongly left out.
pub fn kkt_residual(alloc: &Allocation, links: &[UserLink], budget: f64) -> f64 {
    let lambda1 = alloc.lambda1;
    let lambda2 = alloc.lambda2;
    let mut worst = (alloc.bandwidth_used() - 1.0).abs();

    let egress: f64 = links
        .iter()
        .zip(&alloc.p)
        .map(|(l, &p)| l.norm_interference * p)
        .sum();
    if alloc.p.iter().any(|&p| p > 0.0) {
        worst = worst.max((egress - budget).abs() / budget);
    }
    if !(lambda1 > 0.0) {
        return if alloc.p.iter().any(|&p| p > 0.0) {
            f64::INFINITY
        } else {
            worst
        };
    }

    for (l, (&x, &p)) in links.iter().zip(alloc.x.iter().zip(&alloc.p)) {
        if l.is_degenerate() {
            continue;
        }
        let (w, e, li) = (l.weight, l.norm_sinr, l.norm_interference);
        let price = lambda1 * li;
        let term = if p > 0.0 && x > 0.0 {
            let power = (w * x * e / (x + p * e) - price).abs() / price;
            let band = (w * marginal_gap(p * e / x) + lambda2).abs() / w;
            power.max(band)
        } else if x > 0.0 {
            (w * e - price).max(0.0) / price
        } else if p > 0.0 {
            // power without band is never produced by a valid schedule
            f64::INFINITY
        } else {
            let ratio = w * e / price;
            if ratio > 1.0 {
                let surplus = w * ratio.ln() - w + price / e + lambda2;
                surplus.max(0.0) / w
            } else {
                0.0
            }
        };
        worst = worst.max(term);
    }
    worst
}
