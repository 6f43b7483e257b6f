//! Comparison schedulers: a fixed transmit power for whoever wins the
//! weighted-rate race, and single-user target-SINR power control.
//! Both give the full band to exactly one user per cell.

use thiserror::Error;

use crate::model::{self, Allocation, UserLink};

fn winner_by(links: &[UserLink], score: impl Fn(&UserLink) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, l) in links.iter().enumerate() {
        let s = score(l);
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// Full band at power `power` to the user maximizing `w_i ln(1 + P e_i)`.
pub fn schedule_fixed_power(links: &[UserLink], power: f64) -> Allocation {
    let mut alloc = Allocation::idle(links.len());
    if let Some(i) = winner_by(links, |l| l.weight * (power * l.norm_sinr).ln_1p()) {
        alloc.x[i] = 1.0;
        alloc.p[i] = power;
        alloc.objective = model::objective(&alloc.x, &alloc.p, links);
    }
    alloc
}

/// Full band to the user maximizing `w_i ln(1 + target)`, powered to reach
/// `target_sinr` against `assumed_npi` Watts of noise plus interference.
///
/// Each link's `norm_sinr` is taken to be normalized against
/// `reference_npi` Watts; the effective value is rescaled to the assumption.
/// Power is clipped at the user's headroom when it has one. Users with
/// zero SINR are never picked unless nobody else is available.
pub fn schedule_target_sinr(
    links: &[UserLink],
    target_sinr: f64,
    assumed_npi: f64,
    reference_npi: f64,
) -> Allocation {
    let mut alloc = Allocation::idle(links.len());
    let gain = target_sinr.ln_1p();
    let winner = winner_by(links, |l| if l.norm_sinr > 0.0 { l.weight * gain } else { -1.0 });
    if let Some(i) = winner {
        let l = &links[i];
        alloc.x[i] = 1.0;
        if l.norm_sinr > 0.0 {
            let effective = l.norm_sinr * reference_npi / assumed_npi;
            let p = target_sinr / effective;
            alloc.p[i] = l.max_power.map_or(p, |cap| p.min(cap));
        }
        alloc.objective = model::objective(&alloc.x, &alloc.p, links);
    }
    alloc
}

#[derive(Debug, Error)]
pub enum CalibrationError<E: std::error::Error + 'static> {
    #[error("reference mean ingress {0:e} W cannot be matched")]
    DegenerateReference(f64),
    #[error("could not bracket the reference {reference:e} W: last power {power:e} W gave {achieved:e} W after {runs} runs")]
    NotBracketed {
        reference: f64,
        power: f64,
        achieved: f64,
        runs: usize,
    },
    #[error("did not reach tolerance after {runs} runs; best power {power:e} W gave {achieved:e} W vs {reference:e} W")]
    NotConverged {
        reference: f64,
        power: f64,
        achieved: f64,
        runs: usize,
    },
    #[error("calibration run failed: {0}")]
    Run(#[source] E),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub power: f64,
    pub mean_ingress: f64,
    pub runs: usize,
}

const MAX_CALIBRATION_RUNS: usize = 60;

/// Finds the scalar parameter (a fixed power, or any other knob that
/// monotonically raises interference) whose run reproduces
/// `reference_mean_ingress` within relative `tolerance`.
///
/// `probe` runs a full simulation for a candidate value and returns its
/// mean ingress interference. The search brackets the reference by
/// proportional extrapolation and then bisects in log-space, using
/// log-log interpolation between bracket ends when it lands well inside.
pub fn calibrate_fixed_power<F, E>(
    mut probe: F,
    reference_mean_ingress: f64,
    initial_power: f64,
    tolerance: f64,
) -> Result<Calibration, CalibrationError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
    E: std::error::Error + 'static,
{
    let reference = reference_mean_ingress;
    if !(reference.is_finite() && reference > 0.0) {
        return Err(CalibrationError::DegenerateReference(reference));
    }
    let close = |m: f64| ((m - reference) / reference).abs() <= tolerance;
    let mut runs = 0;
    let mut run = |p: f64, runs: &mut usize| -> Result<f64, CalibrationError<E>> {
        *runs += 1;
        probe(p).map_err(CalibrationError::Run)
    };

    let mut power = if initial_power.is_finite() && initial_power > 0.0 {
        initial_power
    } else {
        1.0
    };
    let mut achieved = run(power, &mut runs)?;
    if close(achieved) {
        return Ok(Calibration {
            power,
            mean_ingress: achieved,
            runs,
        });
    }

    // (power, ingress) on each side of the reference.
    let mut below: Option<(f64, f64)> = None;
    let mut above: Option<(f64, f64)> = None;
    loop {
        if achieved < reference {
            below = Some((power, achieved));
        } else {
            above = Some((power, achieved));
        }
        if below.is_some() && above.is_some() {
            break;
        }
        if runs >= MAX_CALIBRATION_RUNS {
            return Err(CalibrationError::NotBracketed {
                reference,
                power,
                achieved,
                runs,
            });
        }
        let ratio = if achieved > 0.0 { reference / achieved } else { 1e3 };
        let step = if achieved < reference {
            (ratio * 1.1).clamp(1.5, 1e3)
        } else {
            (ratio * 0.9).clamp(1e-3, 1.0 / 1.5)
        };
        power *= step;
        achieved = run(power, &mut runs)?;
        if close(achieved) {
            return Ok(Calibration {
                power,
                mean_ingress: achieved,
                runs,
            });
        }
    }

    let (mut lo, mut lo_val) = below.unwrap();
    let (mut hi, mut hi_val) = above.unwrap();
    let mut best = if (lo_val - reference).abs() < (hi_val - reference).abs() {
        (lo, lo_val)
    } else {
        (hi, hi_val)
    };
    while runs < MAX_CALIBRATION_RUNS {
        let (llo, lhi) = (lo.ln(), hi.ln());
        let mut guess = 0.5 * (llo + lhi);
        if lo_val > 0.0 {
            let t = (reference.ln() - lo_val.ln()) / (hi_val.ln() - lo_val.ln());
            if t.is_finite() && (0.1..=0.9).contains(&t) {
                guess = llo + t * (lhi - llo);
            }
        }
        let p = guess.exp();
        let m = run(p, &mut runs)?;
        if (m - reference).abs() < (best.1 - reference).abs() {
            best = (p, m);
        }
        if close(m) {
            return Ok(Calibration {
                power: p,
                mean_ingress: m,
                runs,
            });
        }
        if m < reference {
            lo = p;
            lo_val = m;
        } else {
            hi = p;
            hi_val = m;
        }
    }
    Err(CalibrationError::NotConverged {
        reference,
        power: best.0,
        achieved: best.1,
        runs,
    })
}
