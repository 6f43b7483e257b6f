use crate::model::UserLink;

use super::SolverError;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerStepResult {
    pub p: Vec<f64>,
    pub lambda1: f64,
    /// Indices with `p_i > 0`, in threshold order.
    pub active_set: Vec<usize>,
}

/// Water-filling of the budget over users for fixed bandwidth shares.
///
/// Candidates are users with `x_i > 0`, `w_i > 0` and `e_i > 0`, visited in
/// descending order of `w_i e_i / l_i` (ties by index). A candidate joins the
/// active set while its threshold exceeds the current multiplier
/// `lambda1 = sum_A w_i x_i / (I + sum_A l_i x_i / e_i)`.
pub fn power_step(x: &[f64], links: &[UserLink], budget: f64) -> Result<PowerStepResult, SolverError> {
    if x.len() != links.len() {
        return Err(SolverError::LengthMismatch {
            x: x.len(),
            links: links.len(),
        });
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(SolverError::InvalidBudget(budget));
    }

    let mut order: Vec<(usize, f64)> = links
        .iter()
        .zip(x)
        .enumerate()
        .filter(|(_, (l, &xi))| xi > 0.0 && !l.is_degenerate())
        .map(|(i, (l, _))| (i, l.weight * l.norm_sinr / l.norm_interference))
        .collect();
    if order.is_empty() {
        return Err(SolverError::NoTransmitter);
    }
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut weighted = 0.0;
    let mut offset = budget;
    let mut lambda1 = f64::INFINITY;
    let mut active = 0;
    for &(i, threshold) in &order {
        if threshold <= lambda1 && active > 0 {
            break;
        }
        let l = &links[i];
        weighted += l.weight * x[i];
        offset += l.norm_interference * x[i] / l.norm_sinr;
        lambda1 = weighted / offset;
        active += 1;
    }

    let mut p = vec![0.0; links.len()];
    let mut active_set = Vec::with_capacity(active);
    for &(i, _) in &order[..active] {
        let l = &links[i];
        let level = l.weight / (lambda1 * l.norm_interference) - 1.0 / l.norm_sinr;
        if level > 0.0 {
            p[i] = x[i] * level;
            active_set.push(i);
        }
    }
    Ok(PowerStepResult {
        p,
        lambda1,
        active_set,
    })
}
