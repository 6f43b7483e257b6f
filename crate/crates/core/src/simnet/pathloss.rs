use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// COST-231 Hata parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    pub freq_mhz: f64,
    pub bs_height_m: f64,
    pub ms_height_m: f64,
    /// 0 dB for medium cities and suburbs, 3 dB for metropolitan centres.
    pub c_m: f64,
    pub shadowing_sigma_db: f64,
    /// Distances below this are clamped.
    pub min_distance_m: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            freq_mhz: 2000.0,
            bs_height_m: 50.0,
            ms_height_m: 1.5,
            c_m: 0.0,
            shadowing_sigma_db: 0.0,
            min_distance_m: 35.0,
        }
    }
}

impl PathLossParams {
    pub fn in_validity_range(&self) -> bool {
        (1500.0..=2000.0).contains(&self.freq_mhz)
    }

    /// Mobile antenna height correction `a(h_m)` for small and medium cities.
    pub fn mobile_correction(&self) -> f64 {
        let lf = self.freq_mhz.log10();
        (1.1 * lf - 0.7) * self.ms_height_m - (1.56 * lf - 0.8)
    }
}

/// Median COST-Hata path loss in dB, distance in metres.
pub fn cost_hata_pl(distance_m: f64, params: &PathLossParams) -> f64 {
    let d_km = distance_m.max(params.min_distance_m) / 1000.0;
    let lf = params.freq_mhz.log10();
    let lh = params.bs_height_m.log10();
    46.3 + 33.9 * lf - 13.82 * lh - params.mobile_correction() + (44.9 - 6.55 * lh) * d_km.log10() + params.c_m
}

/// Path loss plus a log-normal shadowing draw when `shadowing_sigma_db > 0`.
pub fn cost_hata_pl_shadowed<R: Rng + ?Sized>(distance_m: f64, params: &PathLossParams, rng: &mut R) -> f64 {
    let median = cost_hata_pl(distance_m, params);
    if params.shadowing_sigma_db > 0.0 {
        let n = Normal::new(0.0, params.shadowing_sigma_db).expect("sigma is positive");
        median + n.sample(rng)
    } else {
        median
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(v: f64) -> f64 {
    10.0 * v.log10()
}
