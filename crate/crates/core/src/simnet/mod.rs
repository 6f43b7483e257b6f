//! Multi-cell uplink simulator.
//!
//! Every frame each cell schedules its own mobiles from the proportional-fair
//! weights, the normalized interference estimate and a normalized SINR built
//! from the *budgeted* noise plus interference `N0 B + I`. The allocations of
//! all cells are then evaluated together: each transmission is spread evenly
//! over the band, so the ingress at a station is a single number, and every
//! scheduled mobile gets the Shannon rate of its measured SINR.

mod deployment;
mod geometry;
mod pathloss;
mod pf;
mod quantize;

pub use deployment::{build_deployment, Deployment, DeploymentConfig};
pub use geometry::{Lattice, Layout, LayoutError, Point};
pub use pathloss::{cost_hata_pl, cost_hata_pl_shadowed, db_to_linear, linear_to_db, PathLossParams};
pub use pf::{update_pf, PFState};
pub use quantize::{apply_quantization, quantize_allocation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, Calibration, CalibrationError};
use crate::density::{self, ShannonAdaptation};
use crate::model::{self, Allocation, ModelError, NoiseRiseBudget, UserLink};
use crate::solver::{self, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("deployment: {0}")]
    Deployment(String),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("frame {frame}, cell {cell}: {detail}")]
    ConstraintViolation {
        frame: usize,
        cell: usize,
        detail: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Per-cell scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum Scheme {
    /// Joint bandwidth and power optimum under the egress budget.
    #[serde(rename = "nr")]
    NoiseRise,
    /// Best single user at noise-rise density `I`.
    #[serde(rename = "nr_density")]
    NoiseRiseDensity,
    /// Density scheduling with per-user power headroom.
    #[serde(rename = "nr_density_capped")]
    NoiseRiseDensityCapped,
    /// Whole band at a fixed power.
    #[serde(rename = "fixed")]
    FixedPower { power_w: f64 },
    /// Whole band, powered to reach a linear SINR target.
    #[serde(rename = "target_sinr")]
    TargetSinr { target_sinr: f64 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::NoiseRise => "nr",
            Scheme::NoiseRiseDensity => "nr_density",
            Scheme::NoiseRiseDensityCapped => "nr_density_capped",
            Scheme::FixedPower { .. } => "fixed",
            Scheme::TargetSinr { .. } => "target_sinr",
        }
    }

    /// Schemes whose allocations must respect the egress budget.
    pub fn is_budgeted(&self) -> bool {
        matches!(
            self,
            Scheme::NoiseRise | Scheme::NoiseRiseDensity | Scheme::NoiseRiseDensityCapped
        )
    }
}

/// Radio parameters shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub bandwidth_hz: f64,
    /// Thermal noise density including the receiver noise figure, W/Hz.
    pub noise_density_w_hz: f64,
    pub noise_rise_db: f64,
    /// Per-mobile power headroom. Only the capped density scheme and the
    /// target-SINR baseline honour it; the joint optimum is interference limited.
    pub max_power_w: Option<f64>,
    pub frame_duration_s: f64,
    /// Round band shares onto this many resource units before evaluation.
    pub resource_units: Option<usize>,
}

/// -174 dBm/Hz plus a 5 dB noise figure.
pub const DEFAULT_NOISE_DENSITY_W_HZ: f64 = 1.258_925_411_794_167_3e-20;

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            bandwidth_hz: 10e6,
            noise_density_w_hz: DEFAULT_NOISE_DENSITY_W_HZ,
            noise_rise_db: 5.0,
            // 23 dBm
            max_power_w: Some(0.199_526_231_496_887_96),
            frame_duration_s: 5e-3,
            resource_units: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub deployment: DeploymentConfig,
    pub channel: ChannelConfig,
    pub solver: SolverConfig,
    pub frames: usize,
    pub pf_beta: f64,
    /// Starting smoothed throughput of every mobile, bits.
    pub pf_initial_bits: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            deployment: DeploymentConfig::default(),
            channel: ChannelConfig::default(),
            solver: SolverConfig::default(),
            frames: 80,
            pf_beta: 0.9,
            pf_initial_bits: 1e3,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let c = &self.channel;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SimError::Config(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("bandwidth_hz", c.bandwidth_hz)?;
        positive("noise_density_w_hz", c.noise_density_w_hz)?;
        positive("noise_rise_db", c.noise_rise_db)?;
        positive("frame_duration_s", c.frame_duration_s)?;
        positive("pf_initial_bits", self.pf_initial_bits)?;
        positive("isd_m", self.deployment.isd_m)?;
        if let Some(p) = c.max_power_w {
            positive("max_power_w", p)?;
        }
        if c.resource_units == Some(0) {
            return Err(SimError::Config("resource_units must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.pf_beta) {
            return Err(SimError::Config(format!("pf_beta must lie in [0, 1], got {}", self.pf_beta)));
        }
        self.solver.validate()?;
        Ok(())
    }
}

/// One frame of the whole network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub cell_bits: Vec<f64>,
    pub ingress_w: Vec<f64>,
    /// Noise rise over the thermal floor at each station.
    pub ingress_db: Vec<f64>,
    pub egress_w: Vec<f64>,
    pub ms_power_w: Vec<f64>,
    pub ms_bits: Vec<f64>,
    pub scheduled: usize,
    /// Joint solves that came back without a KKT certificate.
    pub uncertified: usize,
}

/// A deployment together with everything the schedulers need per mobile.
#[derive(Debug, Clone)]
pub struct Network {
    deployment: Deployment,
    channel: ChannelConfig,
    solver: SolverConfig,
    budget: NoiseRiseBudget,
    norm_sinr: Vec<f64>,
    norm_interference: Vec<f64>,
}

const CONSTRAINT_SLACK: f64 = 1e-9;

impl Network {
    pub fn new(deployment: Deployment, channel: ChannelConfig, solver: SolverConfig) -> Result<Self, SimError> {
        let budget = NoiseRiseBudget::from_db(channel.noise_rise_db, channel.noise_density_w_hz, channel.bandwidth_hz)?;
        let npi = budget.noise_power + budget.linear_budget;
        let norm_sinr = (0..deployment.num_ms()).map(|ms| deployment.serving_gain(ms) / npi).collect();
        let norm_interference = (0..deployment.num_ms())
            .map(|ms| deployment.normalized_interference(ms))
            .collect();
        Ok(Network {
            deployment,
            channel,
            solver,
            budget,
            norm_sinr,
            norm_interference,
        })
    }

    pub fn from_config(config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let deployment = build_deployment(&config.deployment, config.seed)?;
        Network::new(deployment, config.channel, config.solver)
    }

    pub fn deployment(&self) -> &Deployment {
        &self.deployment
    }

    pub fn channel(&self) -> &ChannelConfig {
        &self.channel
    }

    pub fn budget(&self) -> &NoiseRiseBudget {
        &self.budget
    }

    /// `e_i` in 1/W against the budgeted noise plus interference.
    pub fn norm_sinr(&self, ms: usize) -> f64 {
        self.norm_sinr[ms]
    }

    pub fn norm_interference(&self, ms: usize) -> f64 {
        self.norm_interference[ms]
    }

    /// Links of one cell, ordered like `deployment.members(cell)`.
    pub fn cell_links(&self, cell: usize, pf: &PFState) -> Vec<UserLink> {
        self.deployment
            .members(cell)
            .iter()
            .map(|&ms| UserLink {
                id: ms,
                weight: pf.weight(ms),
                norm_sinr: self.norm_sinr[ms],
                norm_interference: self.norm_interference[ms],
                max_power: self.channel.max_power_w,
            })
            .collect()
    }

    /// Returns the cell's allocation and whether it lacks a certificate.
    fn schedule_cell(&self, scheme: &Scheme, links: &[UserLink]) -> Result<(Allocation, bool), SimError> {
        let budget = self.budget.linear_budget;
        let alloc = match *scheme {
            Scheme::NoiseRise => match solver::solve_joint(links, budget, &self.solver) {
                Ok(sol) => {
                    let uncertified = !sol.is_certified();
                    return Ok((sol.allocation, uncertified));
                }
                Err(SolverError::NoTransmitter) => Allocation::idle(links.len()),
                Err(e) => return Err(e.into()),
            },
            Scheme::NoiseRiseDensity => density::schedule_density(links, budget, &ShannonAdaptation),
            Scheme::NoiseRiseDensityCapped => density::schedule_density_capped(links, budget),
            Scheme::FixedPower { power_w } => baselines::schedule_fixed_power(links, power_w),
            Scheme::TargetSinr { target_sinr } => {
                let npi = self.budget.noise_power + budget;
                baselines::schedule_target_sinr(links, target_sinr, npi, npi)
            }
        };
        Ok((alloc, false))
    }

    fn check_constraints(
        &self,
        scheme: &Scheme,
        links: &[UserLink],
        alloc: &Allocation,
        frame: usize,
        cell: usize,
    ) -> Result<(), SimError> {
        let fail = |detail: String| Err(SimError::ConstraintViolation { frame, cell, detail });
        let budget = self.budget.linear_budget;
        if alloc.x.len() != links.len() || alloc.p.len() != links.len() {
            return fail("allocation length does not match the cell".into());
        }
        if alloc.x.iter().chain(&alloc.p).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return fail("negative or non-finite share or power".into());
        }
        let used = alloc.bandwidth_used();
        if used > 1.0 + CONSTRAINT_SLACK {
            return fail(format!("band shares sum to {used}"));
        }
        if scheme.is_budgeted() {
            let egress: f64 = links.iter().zip(&alloc.p).map(|(l, p)| l.norm_interference * p).sum();
            if egress > budget * (1.0 + CONSTRAINT_SLACK) {
                return fail(format!("egress {egress:e} W over budget {budget:e} W"));
            }
        }
        let density_capped = matches!(scheme, Scheme::NoiseRiseDensity | Scheme::NoiseRiseDensityCapped);
        let headroom = matches!(scheme, Scheme::NoiseRiseDensityCapped | Scheme::TargetSinr { .. });
        for (i, l) in links.iter().enumerate() {
            let (x, p) = (alloc.x[i], alloc.p[i]);
            if density_capped && p > 0.0 && l.norm_interference * p > budget * x * (1.0 + CONSTRAINT_SLACK) {
                return fail(format!("mobile {} exceeds the noise-rise density", l.id));
            }
            if headroom {
                if let Some(cap) = l.max_power {
                    if p > cap * (1.0 + CONSTRAINT_SLACK) {
                        return fail(format!("mobile {} at {p:e} W over its {cap:e} W headroom", l.id));
                    }
                }
            }
            if let Scheme::FixedPower { power_w } = scheme {
                if p != 0.0 && p != *power_w {
                    return fail(format!("mobile {} at {p:e} W instead of {power_w:e} W", l.id));
                }
            }
        }
        Ok(())
    }

    /// Schedules every cell, evaluates the resulting interference and rates.
    pub fn run_frame(&self, scheme: &Scheme, pf: &PFState, frame: usize) -> Result<FrameMetrics, SimError> {
        let d = &self.deployment;
        let cells = d.num_cells();
        let mut allocations = Vec::with_capacity(cells);
        let mut uncertified = 0;
        for cell in 0..cells {
            let links = self.cell_links(cell, pf);
            let (alloc, flagged) = self.schedule_cell(scheme, &links)?;
            self.check_constraints(scheme, &links, &alloc, frame, cell)?;
            uncertified += usize::from(flagged);
            let alloc = match self.channel.resource_units {
                Some(n) => apply_quantization(&alloc, &links, n),
                None => alloc,
            };
            allocations.push(alloc);
        }
        Ok(self.evaluate(&allocations, frame, uncertified)?)
    }

    /// Measured interference and delivered bits for a set of per-cell
    /// allocations, each ordered like `deployment.members(cell)`.
    pub fn evaluate(&self, allocations: &[Allocation], frame: usize, uncertified: usize) -> Result<FrameMetrics, ModelError> {
        let d = &self.deployment;
        let cells = d.num_cells();
        let noise = self.budget.noise_power;
        let bandwidth = self.channel.bandwidth_hz;
        let mut ingress_w = Vec::with_capacity(cells);
        for bs in 0..cells {
            ingress_w.push(model::ingress_interference(d, allocations, bs)?);
        }
        let ingress_db = ingress_w.iter().map(|&i| self.budget.noise_rise_db(i)).collect();

        let mut cell_bits = vec![0.0; cells];
        let mut egress_w = vec![0.0; cells];
        let mut ms_power_w = vec![0.0; d.num_ms()];
        let mut ms_bits = vec![0.0; d.num_ms()];
        let mut scheduled = 0;
        for (cell, alloc) in allocations.iter().enumerate() {
            let npi = noise + ingress_w[cell];
            for (k, &ms) in d.members(cell).iter().enumerate() {
                let (x, p) = (alloc.x[k], alloc.p[k]);
                ms_power_w[ms] = p;
                egress_w[cell] += self.norm_interference[ms] * p;
                if x > 0.0 {
                    scheduled += 1;
                    let nats = model::shannon_rate(x, p, d.serving_gain(ms) / npi, bandwidth)?;
                    let bits = nats / std::f64::consts::LN_2 * self.channel.frame_duration_s;
                    ms_bits[ms] = bits;
                    cell_bits[cell] += bits;
                }
            }
        }
        Ok(FrameMetrics {
            frame,
            cell_bits,
            ingress_w,
            ingress_db,
            egress_w,
            ms_power_w,
            ms_bits,
            scheduled,
            uncertified,
        })
    }

    /// Runs `frames` frames from a fresh PF state.
    pub fn run(&self, scheme: &Scheme, frames: usize, pf_initial_bits: f64, pf_beta: f64) -> Result<MetricsBundle, SimError> {
        let mut pf = PFState::new(self.deployment.num_ms(), pf_initial_bits, pf_beta);
        let mut out = Vec::with_capacity(frames);
        for frame in 0..frames {
            let m = self.run_frame(scheme, &pf, frame)?;
            pf = update_pf(&pf, &m.ms_bits);
            out.push(m);
        }
        Ok(MetricsBundle::collect(self, scheme, out))
    }

    /// Fixed power matching `reference_mean_ingress` within relative `tolerance`.
    pub fn calibrate_fixed_power(
        &self,
        reference_mean_ingress: f64,
        tolerance: f64,
        frames: usize,
        pf_initial_bits: f64,
        pf_beta: f64,
    ) -> Result<Calibration, CalibrationError<SimError>> {
        let mean_l = self.norm_interference.iter().sum::<f64>() / self.norm_interference.len().max(1) as f64;
        let initial = self.budget.linear_budget / mean_l;
        baselines::calibrate_fixed_power(
            |power_w| {
                self.run(&Scheme::FixedPower { power_w }, frames, pf_initial_bits, pf_beta)
                    .map(|m| m.mean_ingress_w)
            },
            reference_mean_ingress,
            initial,
            tolerance,
        )
    }
}

/// Log-spaced histogram of the nonzero transmit powers, in dBm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerHistogram {
    pub edges_dbm: Vec<f64>,
    /// `counts[k]` covers `[edges[k], edges[k + 1])`; samples outside are
    /// folded into the end bins.
    pub counts: Vec<u64>,
}

const HISTOGRAM_LOW_DBM: f64 = -40.0;
const HISTOGRAM_HIGH_DBM: f64 = 60.0;
const HISTOGRAM_STEP_DB: f64 = 2.0;

impl PowerHistogram {
    fn from_powers<'a>(powers: impl Iterator<Item = &'a f64>) -> Self {
        let bins = ((HISTOGRAM_HIGH_DBM - HISTOGRAM_LOW_DBM) / HISTOGRAM_STEP_DB) as usize;
        let edges_dbm = (0..=bins).map(|k| HISTOGRAM_LOW_DBM + k as f64 * HISTOGRAM_STEP_DB).collect();
        let mut counts = vec![0; bins];
        for &p in powers.filter(|&&p| p > 0.0) {
            let dbm = linear_to_db(p) + 30.0;
            let k = ((dbm - HISTOGRAM_LOW_DBM) / HISTOGRAM_STEP_DB).floor();
            let k = k.clamp(0.0, (bins - 1) as f64) as usize;
            counts[k] += 1;
        }
        PowerHistogram { edges_dbm, counts }
    }
}

/// Everything a run reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsBundle {
    pub scheme: Scheme,
    pub num_cells: usize,
    pub num_ms: usize,
    pub budget_w: f64,
    pub noise_power_w: f64,
    /// Bits per cell per frame, averaged over cells and frames.
    pub mean_throughput: f64,
    pub total_bits: f64,
    pub mean_ingress_w: f64,
    /// Standard deviation over every (frame, cell) sample.
    pub ingress_std_w: f64,
    pub mean_ingress_db: f64,
    pub ingress_std_db: f64,
    pub mean_egress_w: f64,
    pub power_histogram: PowerHistogram,
    pub per_ms_bits: Vec<f64>,
    /// Bits per second over the whole run.
    pub per_ms_rate: Vec<f64>,
    /// 5th percentile of the per-mobile spectral efficiency, bit/s/Hz.
    pub edge_5pct: f64,
    pub jain_index: f64,
    pub uncertified: usize,
    pub frames: Vec<FrameMetrics>,
}

fn mean_std(samples: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = samples.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = samples.clone().sum::<f64>() / n as f64;
    let var = samples.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Linear-interpolated quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// `(sum v)^2 / (n sum v^2)`; 1 for all-zero input.
pub fn jain_index(values: &[f64]) -> f64 {
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        1.0
    } else {
        sum * sum / (values.len() as f64 * sq)
    }
}

impl MetricsBundle {
    fn collect(net: &Network, scheme: &Scheme, frames: Vec<FrameMetrics>) -> Self {
        let cells = net.deployment.num_cells();
        let num_ms = net.deployment.num_ms();
        let total_bits: f64 = frames.iter().flat_map(|f| &f.cell_bits).sum();
        let samples = (frames.len() * cells).max(1) as f64;
        let (mean_ingress_w, ingress_std_w) = mean_std(frames.iter().flat_map(|f| f.ingress_w.iter().copied()));
        let (mean_ingress_db, ingress_std_db) = mean_std(frames.iter().flat_map(|f| f.ingress_db.iter().copied()));
        let mean_egress_w = frames.iter().flat_map(|f| &f.egress_w).sum::<f64>() / samples;

        let mut per_ms_bits = vec![0.0; num_ms];
        for f in &frames {
            for (acc, b) in per_ms_bits.iter_mut().zip(&f.ms_bits) {
                *acc += b;
            }
        }
        let duration = frames.len() as f64 * net.channel.frame_duration_s;
        let per_ms_rate: Vec<f64> = per_ms_bits
            .iter()
            .map(|b| if duration > 0.0 { b / duration } else { 0.0 })
            .collect();
        let mut efficiency: Vec<f64> = per_ms_rate.iter().map(|r| r / net.channel.bandwidth_hz).collect();
        efficiency.sort_by(f64::total_cmp);

        MetricsBundle {
            scheme: *scheme,
            num_cells: cells,
            num_ms,
            budget_w: net.budget.linear_budget,
            noise_power_w: net.budget.noise_power,
            mean_throughput: total_bits / samples,
            total_bits,
            mean_ingress_w,
            ingress_std_w,
            mean_ingress_db,
            ingress_std_db,
            mean_egress_w,
            power_histogram: PowerHistogram::from_powers(frames.iter().flat_map(|f| &f.ms_power_w)),
            edge_5pct: quantile(&efficiency, 0.05),
            jain_index: jain_index(&per_ms_rate),
            uncertified: frames.iter().map(|f| f.uncertified).sum(),
            per_ms_bits,
            per_ms_rate,
            frames,
        }
    }

    /// Share of (frame, cell) noise-rise samples within `tol_db` of `target_db`.
    pub fn noise_rise_mass_within(&self, target_db: f64, tol_db: f64) -> f64 {
        let all = self.frames.iter().flat_map(|f| &f.ingress_db);
        let n = all.clone().count();
        if n == 0 {
            return 0.0;
        }
        all.filter(|&&db| (db - target_db).abs() <= tol_db).count() as f64 / n as f64
    }
}

/// Builds the configured network and runs `scheme` on it.
pub fn run_simulation(config: &SimConfig, scheme: &Scheme) -> Result<MetricsBundle, SimError> {
    let net = Network::from_config(config)?;
    net.run(scheme, config.frames, config.pf_initial_bits, config.pf_beta)
}
