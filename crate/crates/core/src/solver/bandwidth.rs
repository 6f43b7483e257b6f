use crate::model::UserLink;

use super::SolverError;

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthStepResult {
    pub x: Vec<f64>,
    pub lambda2: f64,
    pub search_iterations: usize,
}

/// `f(a) = ln(1 + a) - a / (1 + a)`: the marginal value of bandwidth for a
/// user running at SNR `a`, per unit weight.
pub fn marginal_gap(alpha: f64) -> f64 {
    if alpha < 1e-2 {
        // Alternating series sum_{n>=2} (-1)^n (n-1)/n a^n; the direct form cancels badly here.
        let mut term = alpha * alpha;
        let mut sum = 0.0;
        for n in 2..12 {
            let nf = n as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (nf - 1.0) / nf * term;
            term *= alpha;
        }
        sum
    } else {
        alpha.ln_1p() - alpha / (1.0 + alpha)
    }
}

/// Solves `marginal_gap(a) = target` for `a > 0`.
///
/// Brackets by doubling/halving from `a = 1`, then runs Newton in `ln a`
/// with a bisection fallback whenever a step leaves the bracket.
pub fn solve_snr(target: f64) -> f64 {
    debug_assert!(target > 0.0);
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    if marginal_gap(1.0) < target {
        while marginal_gap(hi) < target {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::MAX;
            }
        }
    } else {
        while marginal_gap(lo) > target {
            hi = lo;
            lo *= 0.5;
            if lo < f64::MIN_POSITIVE {
                return lo;
            }
        }
    }
    if lo == hi {
        return lo;
    }

    let (mut ulo, mut uhi) = (lo.ln(), hi.ln());
    let mut u = if target < 0.5 {
        (2.0 * target).sqrt().ln()
    } else {
        target + 1.0
    }
    .clamp(ulo, uhi);
    for _ in 0..200 {
        let a = u.exp();
        let r = marginal_gap(a) - target;
        if r == 0.0 {
            return a;
        }
        if r < 0.0 {
            ulo = u;
        } else {
            uhi = u;
        }
        // d f / d ln a = a^2 / (1 + a)^2
        let slope = (a / (1.0 + a)).powi(2);
        let mut next = u - r / slope;
        if !(next > ulo && next < uhi) {
            next = 0.5 * (ulo + uhi);
        }
        if (next - u).abs() <= 1e-15 * u.abs().max(1.0) || uhi - ulo <= 1e-15 * u.abs().max(1.0) {
            return next.exp();
        }
        u = next;
    }
    u.exp()
}

fn signals(p: &[f64], links: &[UserLink]) -> Vec<f64> {
    links
        .iter()
        .zip(p)
        .map(|(l, &pi)| {
            if l.weight > 0.0 && pi > 0.0 {
                pi * l.norm_sinr
            } else {
                0.0
            }
        })
        .collect()
}

/// Bracket on the bandwidth multiplier that makes the shares sum to one.
pub fn lambda2_bounds(p: &[f64], links: &[UserLink]) -> Result<(f64, f64), SolverError> {
    if p.len() != links.len() {
        return Err(SolverError::LengthMismatch {
            x: p.len(),
            links: links.len(),
        });
    }
    let s = signals(p, links);
    let m = s.iter().filter(|&&v| v > 0.0).count();
    if m == 0 {
        return Err(SolverError::NoTransmitter);
    }
    let mf = m as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (l, &a) in links.iter().zip(&s) {
        if a > 0.0 {
            lo = lo.min(-l.weight * marginal_gap(mf * a));
            hi = hi.max(-l.weight * marginal_gap(a));
        }
    }
    Ok((lo, hi))
}

/// Unnormalized shares `x~_i(lambda2) = p_i e_i / a_i` with
/// `marginal_gap(a_i) = -lambda2 / w_i`.
pub fn shares_for_lambda2(lambda2: f64, p: &[f64], links: &[UserLink]) -> Vec<f64> {
    debug_assert!(lambda2 < 0.0);
    signals(p, links)
        .iter()
        .zip(links)
        .map(|(&s, l)| {
            if s > 0.0 {
                s / solve_snr(-lambda2 / l.weight)
            } else {
                0.0
            }
        })
        .collect()
}

/// Bandwidth shares for fixed powers: safeguarded Newton search on
/// `lambda2` inside its bracket until the shares sum to one within `tol`.
/// The returned shares are renormalized to sum to one exactly.
pub fn bandwidth_step(p: &[f64], links: &[UserLink], tol: f64) -> Result<BandwidthStepResult, SolverError> {
    bandwidth_step_from(p, links, tol, None)
}

pub(crate) fn bandwidth_step_from(
    p: &[f64],
    links: &[UserLink],
    tol: f64,
    hint: Option<f64>,
) -> Result<BandwidthStepResult, SolverError> {
    let (mut lo, mut hi) = lambda2_bounds(p, links)?;
    let s = signals(p, links);
    let users: Vec<usize> = (0..s.len()).filter(|&i| s[i] > 0.0).collect();

    if users.len() == 1 {
        let mut x = vec![0.0; links.len()];
        x[users[0]] = 1.0;
        return Ok(BandwidthStepResult {
            x,
            lambda2: hi,
            search_iterations: 0,
        });
    }

    let eval = |lambda2: f64, shares: &mut [f64]| -> (f64, f64) {
        let mut sum = 0.0;
        let mut slope = 0.0;
        for &i in &users {
            let w = links[i].weight;
            let a = solve_snr(-lambda2 / w);
            let xi = s[i] / a;
            shares[i] = xi;
            sum += xi;
            slope += xi * ((1.0 + a) / a).powi(2) / w;
        }
        (sum - 1.0, slope)
    };

    let mut shares = vec![0.0; links.len()];
    let (r_lo, _) = eval(lo, &mut shares);
    let (r_hi, _) = eval(hi, &mut shares);
    if r_lo > tol || r_hi < -tol {
        return Err(SolverError::Internal(format!(
            "lambda2 root not bracketed: residuals {r_lo:e} at {lo:e}, {r_hi:e} at {hi:e}"
        )));
    }

    let mut lambda2 = match hint {
        Some(h) if h > lo && h < hi => h,
        _ => 0.5 * (lo + hi),
    };
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (r, slope) = eval(lambda2, &mut shares);
        if r.abs() <= tol {
            break;
        }
        if r < 0.0 {
            lo = lambda2;
        } else {
            hi = lambda2;
        }
        let mut next = lambda2 - r / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == lambda2 || iterations >= 300 {
            if r.abs() > 1e3 * tol {
                return Err(SolverError::Internal(format!(
                    "lambda2 search stalled at {lambda2:e} with residual {r:e}"
                )));
            }
            break;
        }
        lambda2 = next;
    }

    let total: f64 = shares.iter().sum();
    for v in &mut shares {
        *v /= total;
    }
    Ok(BandwidthStepResult {
        x: shares,
        lambda2,
        search_iterations: iterations,
    })
}
