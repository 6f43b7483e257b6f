use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{Lattice, Layout, LayoutError, Point};
use super::pathloss::{cost_hata_pl_shadowed, db_to_linear, PathLossParams};
use super::SimError;
use crate::model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    pub layout: Layout,
    pub isd_m: f64,
    pub wrap: bool,
    pub num_ms: usize,
    pub min_ms_per_cell: usize,
    pub pathloss: PathLossParams,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        DeploymentConfig {
            layout: Layout::HexRings { rings: 2 },
            isd_m: 1500.0,
            wrap: true,
            num_ms: 190,
            min_ms_per_cell: 2,
            pathloss: PathLossParams::default(),
        }
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Base stations, mobiles and the full mobile-to-station gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    lattice: Lattice,
    ms_positions: Vec<Point>,
    serving: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// Row-major `[ms][bs]`, linear.
    gains: Vec<f64>,
}

impl Deployment {
    pub fn num_cells(&self) -> usize {
        self.lattice.num_cells()
    }

    pub fn num_ms(&self) -> usize {
        self.ms_positions.len()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn bs_positions(&self) -> &[Point] {
        &self.lattice.sites
    }

    pub fn ms_positions(&self) -> &[Point] {
        &self.ms_positions
    }

    pub fn wrap(&self) -> bool {
        self.lattice.wrap
    }

    /// Linear gain between mobile `ms` and station `bs`.
    pub fn gain(&self, ms: usize, bs: usize) -> f64 {
        self.gains[ms * self.num_cells() + bs]
    }

    pub fn gain_row(&self, ms: usize) -> &[f64] {
        let n = self.num_cells();
        &self.gains[ms * n..(ms + 1) * n]
    }

    pub fn serving(&self, ms: usize) -> usize {
        self.serving[ms]
    }

    pub fn serving_map(&self) -> &[usize] {
        &self.serving
    }

    pub fn members(&self, cell: usize) -> &[usize] {
        &self.members[cell]
    }

    pub fn serving_gain(&self, ms: usize) -> f64 {
        self.gain(ms, self.serving[ms])
    }

    /// Downlink SIR with equal station powers, using reciprocal gains.
    pub fn downlink_sir(&self, ms: usize) -> f64 {
        let serving = self.serving[ms];
        let others: f64 = self
            .gain_row(ms)
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != serving)
            .map(|(_, g)| g)
            .sum();
        self.serving_gain(ms) / others
    }

    /// Interference per Watt the mobile injects into all other stations,
    /// estimated the way a station would from the downlink SIR report.
    pub fn normalized_interference(&self, ms: usize) -> f64 {
        model::normalized_interference(self.serving_gain(ms), self.downlink_sir(ms))
            .expect("gains are positive")
    }

    /// Builds a deployment from hand-placed mobiles.
    pub fn from_positions(
        lattice: Lattice,
        ms_positions: Vec<Point>,
        pathloss: &PathLossParams,
    ) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Self::assemble(lattice, ms_positions, pathloss, &mut rng)
    }

    fn assemble<R: Rng + ?Sized>(
        lattice: Lattice,
        ms_positions: Vec<Point>,
        pathloss: &PathLossParams,
        rng: &mut R,
    ) -> Result<Self, SimError> {
        let cells = lattice.num_cells();
        let mut gains = Vec::with_capacity(ms_positions.len() * cells);
        let mut serving = Vec::with_capacity(ms_positions.len());
        for &p in &ms_positions {
            let row_start = gains.len();
            for bs in 0..cells {
                let pl = cost_hata_pl_shadowed(lattice.distance(p, bs), pathloss, rng);
                let g = db_to_linear(-pl);
                if !(g.is_finite() && g > 0.0) {
                    return Err(SimError::Deployment(format!("non-positive gain {g:e} at station {bs}")));
                }
                gains.push(g);
            }
            let row = &gains[row_start..];
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, &g)| if g > acc.1 { (k, g) } else { acc })
                .0;
            serving.push(best);
        }
        let mut members = vec![Vec::new(); cells];
        for (ms, &bs) in serving.iter().enumerate() {
            members[bs].push(ms);
        }
        Ok(Deployment {
            lattice,
            ms_positions,
            serving,
            members,
            gains,
        })
    }
}

impl From<LayoutError> for SimError {
    fn from(e: LayoutError) -> Self {
        SimError::Deployment(e.to_string())
    }
}

/// Drops mobiles uniformly over the service area and keeps redrawing the
/// whole drop until every cell serves at least `min_ms_per_cell` of them.
pub fn build_deployment(config: &DeploymentConfig, rng_seed: u64) -> Result<Deployment, SimError> {
    let lattice = Lattice::new(config.layout, config.isd_m, config.wrap)?;
    let cells = lattice.num_cells();
    if config.num_ms < config.min_ms_per_cell * cells {
        return Err(SimError::Deployment(format!(
            "{} mobiles cannot give {} cells at least {} each",
            config.num_ms, cells, config.min_ms_per_cell
        )));
    }
    if !config.pathloss.in_validity_range() {
        log::warn!(
            "COST-Hata evaluated at {} MHz, outside its 1500-2000 MHz range",
            config.pathloss.freq_mhz
        );
    }
    if config.isd_m < 2000.0 {
        log::debug!("COST-Hata applied below its 1 km distance range (ISD {} m)", config.isd_m);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let positions: Vec<Point> = (0..config.num_ms)
            .map(|_| {
                let bs = rng.random_range(0..cells);
                lattice.sample_in_cell(bs, &mut rng)
            })
            .collect();
        let d = Deployment::assemble(lattice.clone(), positions, &config.pathloss, &mut rng)?;
        if d.members.iter().all(|m| m.len() >= config.min_ms_per_cell) {
            return Ok(d);
        }
    }
    Err(SimError::Deployment(format!(
        "no drop with {} mobiles per cell after {MAX_PLACEMENT_ATTEMPTS} attempts",
        config.min_ms_per_cell
    )))
}
