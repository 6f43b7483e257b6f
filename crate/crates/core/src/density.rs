//! Scheduling under a per-user noise-rise *density* cap `l_i p_i / x_i <= I`.
//!
//! With the density fixed at its cap every user's power per unit band is
//! known before scheduling, so the rate per unit band is too, and the best
//! single user takes the whole band. The capped variant cascades the band
//! down the ranking when a user runs out of power headroom.

use crate::model::{self, Allocation, UserLink};

/// Maps a power density (Watts per unit band share) to a rate per unit band.
pub trait RateAdaptation {
    fn rate(&self, density: f64, link: &UserLink) -> f64;
}

/// `ln(1 + rho e)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShannonAdaptation;

impl RateAdaptation for ShannonAdaptation {
    fn rate(&self, density: f64, link: &UserLink) -> f64 {
        (density * link.norm_sinr).ln_1p()
    }
}

impl<F> RateAdaptation for F
where
    F: Fn(f64, &UserLink) -> f64,
{
    fn rate(&self, density: f64, link: &UserLink) -> f64 {
        self(density, link)
    }
}

fn argmax_first(scores: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.enumerate() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best
}

/// Single winner: the user maximizing `w_i * rate(I / l_i)` gets the whole
/// band at density `I`. If every score is zero the lowest index is scheduled.
pub fn schedule_density<R: RateAdaptation + ?Sized>(links: &[UserLink], budget: f64, rate_fn: &R) -> Allocation {
    let mut alloc = Allocation::idle(links.len());
    let Some((winner, _)) = argmax_first(
        links
            .iter()
            .map(|l| l.weight * rate_fn.rate(budget / l.norm_interference, l)),
    ) else {
        return alloc;
    };
    alloc.x[winner] = 1.0;
    alloc.p[winner] = budget / links[winner].norm_interference;
    alloc.objective = model::objective(&alloc.x, &alloc.p, links);
    alloc
}

/// Density scheduling with per-user power headroom.
///
/// Users are ranked by `w_i ln(1 + I e_i / l_i)`. Walking the ranking, each
/// user receives `x_i = min(remaining, P_max l_i / I)` at density `I`. If the
/// band is not exhausted once every user with a positive score is capped,
/// the remainder is spread over the scheduled users in proportion to their
/// shares with powers frozen, which lowers their density below `I`.
/// Users with a zero score are only scheduled when nobody has a positive one.
pub fn schedule_density_capped(links: &[UserLink], budget: f64) -> Allocation {
    let m = links.len();
    let mut alloc = Allocation::idle(m);
    if m == 0 {
        return alloc;
    }
    let scores: Vec<f64> = links
        .iter()
        .map(|l| l.weight * ShannonAdaptation.rate(budget / l.norm_interference, l))
        .collect();
    let mut order: Vec<usize> = (0..m).filter(|&i| scores[i] > 0.0).collect();
    if order.is_empty() {
        order.push(0);
    }
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut remaining = 1.0;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let l = &links[i];
        let share = match l.max_power {
            Some(cap) => (cap * l.norm_interference / budget).min(remaining),
            None => remaining,
        };
        alloc.x[i] = share;
        alloc.p[i] = match l.max_power {
            Some(cap) => (share * budget / l.norm_interference).min(cap),
            None => share * budget / l.norm_interference,
        };
        remaining -= share;
    }

    if remaining > 0.0 {
        let used: f64 = alloc.x.iter().sum();
        if used > 0.0 {
            let scale = 1.0 / used;
            for v in alloc.x.iter_mut() {
                *v *= scale;
            }
        }
    }
    alloc.objective = model::objective(&alloc.x, &alloc.p, links);
    alloc
}
