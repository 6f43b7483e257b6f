//! Rounding continuous band shares onto whole resource units.

use crate::model::{Allocation, UserLink};

/// Largest-remainder apportionment of `x` onto `num_units` units.
///
/// The total handed out is `floor(N sum x)` (so never more than `N` when
/// `sum x <= 1`); leftover units go to the largest fractional remainders,
/// ties to the lower index.
pub fn quantize_allocation(x: &[f64], num_units: usize) -> Vec<usize> {
    let n = num_units as f64;
    let quotas: Vec<f64> = x.iter().map(|&v| v.max(0.0) * n).collect();
    let mut units: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let total_quota: f64 = quotas.iter().sum();
    let target = ((total_quota + 1e-9).floor() as usize).min(num_units);
    let assigned: usize = units.iter().sum();
    if assigned < target {
        let mut order: Vec<usize> = (0..x.len()).filter(|&i| quotas[i] > 0.0).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().take(target - assigned) {
            units[i] += 1;
        }
    }
    units
}

/// Applies the unit rounding to an allocation. Users rounded down to zero
/// units are silenced and the egress they held is handed to the remaining
/// transmitters by scaling their powers, so `sum l p` is unchanged.
pub fn apply_quantization(alloc: &Allocation, links: &[UserLink], num_units: usize) -> Allocation {
    let units = quantize_allocation(&alloc.x, num_units);
    let mut out = alloc.clone();
    let mut kept = 0.0;
    let mut total = 0.0;
    for (i, &u) in units.iter().enumerate() {
        let egress = links[i].norm_interference * alloc.p[i];
        total += egress;
        out.x[i] = u as f64 / num_units as f64;
        if u == 0 {
            out.p[i] = 0.0;
        } else {
            kept += egress;
        }
    }
    if kept > 0.0 && total > kept {
        let scale = total / kept;
        for (p, &u) in out.p.iter_mut().zip(&units) {
            if u > 0 {
                *p *= scale;
            }
        }
    }
    out.objective = crate::model::objective(&out.x, &out.p, links);
    out
}
