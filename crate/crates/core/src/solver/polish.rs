//! Exact solution of the optimality conditions on a given support.
//!
//! For a fixed power price `lambda1` each user's best SNR per unit band is
//! `t_i / lambda1 - 1` with `t_i = w_i e_i / l_i`, independent of its share,
//! so its net value per unit band is
//!
//! `h_i(lambda1) = w_i (ln(t_i / lambda1) - 1 + lambda1 / t_i)` for `lambda1 < t_i`, else 0,
//!
//! and the band is worth most to whoever maximizes `h_i`. The dual
//! `lambda1 I + max_i h_i(lambda1)` is convex in `lambda1`; its minimizer is
//! either a smooth point where one user alone spends the budget, or a kink
//! where two users tie and split the band so that the budget is met exactly.
//! Then `lambda2 = -max_i h_i`.

use crate::model::{self, Allocation, UserLink};

fn net_value(link: &UserLink, lambda1: f64) -> f64 {
    let t = link.weight * link.norm_sinr / link.norm_interference;
    if lambda1 >= t {
        0.0
    } else {
        link.weight * ((t / lambda1).ln() - 1.0 + lambda1 / t)
    }
}

/// `l_i p_i / x_i` at price `lambda1`.
fn density(link: &UserLink, lambda1: f64) -> f64 {
    (link.weight / lambda1 - link.norm_interference / link.norm_sinr).max(0.0)
}

fn best(links: &[UserLink], support: &[usize], lambda1: f64) -> usize {
    let mut best = support[0];
    let mut value = net_value(&links[best], lambda1);
    for &i in &support[1..] {
        let v = net_value(&links[i], lambda1);
        if v > value {
            best = i;
            value = v;
        }
    }
    best
}

const BISECTION_STEPS: usize = 200;

/// Optimal allocation among `support` (non-degenerate users only); everyone
/// else gets nothing. `None` when the support is empty.
pub fn solve_on_support(links: &[UserLink], budget: f64, support: &[usize]) -> Option<Allocation> {
    if support.is_empty() {
        return None;
    }
    // Price at which user i alone spends the whole budget on the whole band.
    let solo = |i: usize| {
        let l = &links[i];
        l.weight / (budget + l.norm_interference / l.norm_sinr)
    };
    let mut lo = support.iter().map(|&i| solo(i)).fold(f64::INFINITY, f64::min);
    let mut hi = support.iter().map(|&i| solo(i)).fold(0.0, f64::max);
    if !(lo > 0.0 && hi.is_finite()) {
        return None;
    }
    // Below the price the leader overspends, above it underspends.
    for _ in 0..BISECTION_STEPS {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        if density(&links[best(links, support, mid)], mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = best(links, support, lo);
    let b = best(links, support, hi);

    let mut alloc = Allocation::idle(links.len());
    let lambda1 = if a == b {
        let lambda1 = solo(a);
        alloc.x[a] = 1.0;
        alloc.p[a] = budget / links[a].norm_interference;
        lambda1
    } else {
        // Tie point of the two leaders.
        let (mut l_lo, mut l_hi) = (lo, hi);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (l_lo + l_hi);
            if !(mid > l_lo && mid < l_hi) {
                break;
            }
            if net_value(&links[a], mid) >= net_value(&links[b], mid) {
                l_lo = mid;
            } else {
                l_hi = mid;
            }
        }
        let lambda1 = 0.5 * (l_lo + l_hi);
        let (da, db) = (density(&links[a], lambda1), density(&links[b], lambda1));
        let xa = if da > db { ((budget - db) / (da - db)).clamp(0.0, 1.0) } else { 1.0 };
        alloc.x[a] = xa;
        alloc.x[b] = 1.0 - xa;
        for i in [a, b] {
            alloc.p[i] = alloc.x[i] * density(&links[i], lambda1) / links[i].norm_interference;
        }
        lambda1
    };
    alloc.lambda1 = lambda1;
    alloc.lambda2 = -support
        .iter()
        .map(|&i| net_value(&links[i], lambda1))
        .fold(0.0, f64::max);
    alloc.objective = model::objective(&alloc.x, &alloc.p, links);
    Some(alloc)
}
