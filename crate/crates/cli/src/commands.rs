use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use noiserise::model::UserLink;
use noiserise::simnet::{MetricsBundle, Network, PowerHistogram, Scheme, SimConfig};
use noiserise::solver::{self, IterationRecord, SolverConfig, SolverError};

use crate::config::{self, ConfigError, ExperimentConfig, SchemeSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad configuration or input file: exit code 1.
    Config(String),
    /// Failure while running: exit code 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Twelve significant digits.
fn num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Writes through a temporary file in the same directory so readers never
/// see a partial file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| runtime(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    Ok(match path {
        Some(p) => config::load(p, overrides)?,
        None => {
            let mut doc = toml::Table::new();
            config::apply_overrides(&mut doc, overrides)?;
            config::interpret(doc)?
        }
    })
}

fn run_scheme(net: &Network, sim: &SimConfig, scheme: &Scheme) -> Result<MetricsBundle, CliError> {
    net.run(scheme, sim.frames, sim.pf_initial_bits, sim.pf_beta).map_err(runtime)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationInfo {
    pub reference_mean_ingress_w: f64,
    pub achieved_mean_ingress_w: f64,
    pub runs: usize,
}

/// Resolves a scheme, calibrating a fixed power against the noise-rise
/// scheme's mean ingress when none was given.
fn resolve_scheme(
    net: &Network,
    cfg: &ExperimentConfig,
    choice: SchemeSpec,
    reference: Option<&MetricsBundle>,
) -> Result<(Scheme, Option<CalibrationInfo>), CliError> {
    if let Some(s) = choice.resolved() {
        return Ok((s, None));
    }
    let owned;
    let reference = match reference {
        Some(r) => r,
        None => {
            owned = run_scheme(net, &cfg.sim, &Scheme::NoiseRise)?;
            &owned
        }
    };
    let sim = &cfg.sim;
    let c = net
        .calibrate_fixed_power(
            reference.mean_ingress_w,
            cfg.calibration_tolerance,
            sim.frames,
            sim.pf_initial_bits,
            sim.pf_beta,
        )
        .map_err(|e| runtime(format!("fixed-power calibration failed: {e}")))?;
    Ok((
        Scheme::FixedPower { power_w: c.power },
        Some(CalibrationInfo {
            reference_mean_ingress_w: reference.mean_ingress_w,
            achieved_mean_ingress_w: c.mean_ingress,
            runs: c.runs,
        }),
    ))
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub config_hash: String,
    pub seed: u64,
    pub num_cells: usize,
    pub num_ms: usize,
    pub frames: usize,
    pub noise_rise_db: f64,
    pub budget_w: f64,
    pub noise_power_w: f64,
    /// Bits per cell per frame.
    pub mean_throughput: f64,
    pub total_bits: f64,
    pub mean_ingress_w: f64,
    pub ingress_std_w: f64,
    pub mean_ingress_db: f64,
    pub ingress_std_db: f64,
    pub mean_egress_w: f64,
    pub edge_5pct: f64,
    pub jain_index: f64,
    pub uncertified_solves: usize,
    pub calibration: Option<CalibrationInfo>,
    pub power_histogram: PowerHistogram,
    pub runtime_s: f64,
}

fn frames_csv(m: &MetricsBundle) -> String {
    let mut out = String::from("frame,cell,throughput_bits,ingress_w,ingress_db,egress_w\n");
    for f in &m.frames {
        for cell in 0..m.num_cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                f.frame,
                cell,
                num(f.cell_bits[cell]),
                num(f.ingress_w[cell]),
                num(f.ingress_db[cell]),
                num(f.egress_w[cell])
            );
        }
    }
    out
}

/// Nonzero transmit powers only.
fn powers_csv(m: &MetricsBundle) -> String {
    let mut out = String::from("frame,ms,power_w\n");
    for f in &m.frames {
        for (ms, &p) in f.ms_power_w.iter().enumerate() {
            if p > 0.0 {
                let _ = writeln!(out, "{},{},{}", f.frame, ms, num(p));
            }
        }
    }
    out
}

fn per_ms_csv(m: &MetricsBundle, net: &Network) -> String {
    let mut out = String::from("ms,cell,total_bits,mean_rate_bps\n");
    for ms in 0..m.num_ms {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            ms,
            net.deployment().serving(ms),
            num(m.per_ms_bits[ms]),
            num(m.per_ms_rate[ms])
        );
    }
    out
}

/// Runs one experiment and writes `summary.json`, `frames.csv`,
/// `powers.csv` and `per_ms.csv` into `out_dir`.
pub fn cmd_run(config_path: Option<&Path>, overrides: &[String], out_dir: &Path) -> Result<RunSummary, CliError> {
    let cfg = load_config(config_path, overrides)?;
    let start = Instant::now();
    let net = Network::from_config(&cfg.sim).map_err(runtime)?;
    let (scheme, calibration) = resolve_scheme(&net, &cfg, cfg.scheme, None)?;
    let m = run_scheme(&net, &cfg.sim, &scheme)?;
    let runtime_s = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(out_dir).map_err(|e| runtime(format!("{}: {e}", out_dir.display())))?;
    write_atomic(&out_dir.join("frames.csv"), frames_csv(&m).as_bytes())?;
    write_atomic(&out_dir.join("powers.csv"), powers_csv(&m).as_bytes())?;
    write_atomic(&out_dir.join("per_ms.csv"), per_ms_csv(&m, &net).as_bytes())?;
    let summary = RunSummary {
        scheme,
        config_hash: cfg.hash(),
        seed: cfg.sim.seed,
        num_cells: m.num_cells,
        num_ms: m.num_ms,
        frames: m.frames.len(),
        noise_rise_db: cfg.sim.channel.noise_rise_db,
        budget_w: m.budget_w,
        noise_power_w: m.noise_power_w,
        mean_throughput: m.mean_throughput,
        total_bits: m.total_bits,
        mean_ingress_w: m.mean_ingress_w,
        ingress_std_w: m.ingress_std_w,
        mean_ingress_db: m.mean_ingress_db,
        ingress_std_db: m.ingress_std_db,
        mean_egress_w: m.mean_egress_w,
        edge_5pct: m.edge_5pct,
        jain_index: m.jain_index,
        uncertified_solves: m.uncertified,
        calibration,
        power_histogram: m.power_histogram.clone(),
        runtime_s,
    };
    let json = serde_json::to_vec_pretty(&summary).map_err(runtime)?;
    write_atomic(&out_dir.join("summary.json"), &json)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: String,
    pub nr_db: f64,
    /// `None` when the point failed; `status` says why.
    pub metrics: Option<SweepMetrics>,
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepMetrics {
    pub mean_throughput: f64,
    pub ingress_std_w: f64,
    pub ingress_std_db: f64,
    pub mean_ingress_w: f64,
    pub edge_5pct: f64,
}

impl From<&MetricsBundle> for SweepMetrics {
    fn from(m: &MetricsBundle) -> Self {
        SweepMetrics {
            mean_throughput: m.mean_throughput,
            ingress_std_w: m.ingress_std_w,
            ingress_std_db: m.ingress_std_db,
            mean_ingress_w: m.mean_ingress_w,
            edge_5pct: m.edge_5pct,
        }
    }
}

fn sweep_point(cfg: &ExperimentConfig, base: &Network, nr_db: f64, schemes: &[SchemeSpec]) -> Result<Vec<SweepRow>, CliError> {
    let mut channel = *base.channel();
    channel.noise_rise_db = nr_db;
    let mut point = cfg.clone();
    point.sim.channel = channel;
    let net = Network::new(base.deployment().clone(), channel, cfg.sim.solver).map_err(runtime)?;
    let reference = run_scheme(&net, &point.sim, &Scheme::NoiseRise)?;
    let mut rows = Vec::with_capacity(schemes.len());
    for &choice in schemes {
        let row = |metrics: Option<SweepMetrics>, status: String| SweepRow {
            scheme: choice.name().to_string(),
            nr_db,
            metrics,
            status,
        };
        if choice == SchemeSpec::Nr {
            rows.push(row(Some((&reference).into()), "ok".into()));
            continue;
        }
        match resolve_scheme(&net, &point, choice, Some(&reference)) {
            Ok((scheme, _)) => {
                let m = run_scheme(&net, &point.sim, &scheme)?;
                rows.push(row(Some((&m).into()), "ok".into()));
            }
            Err(CliError::Runtime(msg)) => {
                log::warn!("{} at {nr_db} dB: {msg}", choice.name());
                rows.push(row(None, "calibration_failed".into()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "scheme,nr_db,mean_throughput,ingress_std,edge_5pct,ingress_std_db,mean_ingress_w,status";

/// Runs every (scheme, noise rise) pair on one deployment and writes
/// `sweep.csv`. Rows are grouped by scheme in the order given.
pub fn cmd_sweep(
    config_path: Option<&Path>,
    overrides: &[String],
    nr_db: &[f64],
    schemes: &[String],
    out_dir: &Path,
) -> Result<Vec<SweepRow>, CliError> {
    if nr_db.is_empty() {
        return Err(CliError::Config("sweep needs at least one noise-rise value".into()));
    }
    if schemes.is_empty() {
        return Err(CliError::Config("sweep needs at least one scheme".into()));
    }
    if let Some(bad) = nr_db.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(CliError::Config(format!("noise-rise values must be > 0 dB, got {bad}")));
    }
    let cfg = load_config(config_path, overrides)?;
    let mut choices = Vec::with_capacity(schemes.len());
    for name in schemes {
        let mut choice = SchemeSpec::parse_name(name.trim())?;
        // a fixed power or SINR target from the config file still applies
        match (&mut choice, cfg.scheme) {
            (SchemeSpec::Fixed { power_w }, SchemeSpec::Fixed { power_w: given }) => *power_w = given,
            (SchemeSpec::TargetSinr { target_sinr }, SchemeSpec::TargetSinr { target_sinr: given }) => *target_sinr = given,
            _ => {}
        }
        choices.push(choice);
    }
    let base = Network::from_config(&cfg.sim).map_err(runtime)?;
    let per_point: Vec<Vec<SweepRow>> = nr_db
        .par_iter()
        .map(|&db| sweep_point(&cfg, &base, db, &choices))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(nr_db.len() * choices.len());
    for k in 0..choices.len() {
        for point in &per_point {
            rows.push(point[k].clone());
        }
    }
    let mut csv = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        let cells = match r.metrics {
            Some(m) => [m.mean_throughput, m.ingress_std_w, m.edge_5pct, m.ingress_std_db, m.mean_ingress_w]
                .map(num)
                .join(","),
            None => ",,,,".to_string(),
        };
        let _ = writeln!(csv, "{},{},{},{}", r.scheme, num(r.nr_db), cells, r.status);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| runtime(format!("{}: {e}", out_dir.display())))?;
    write_atomic(&out_dir.join("sweep.csv"), csv.as_bytes())?;
    Ok(rows)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceUser {
    #[serde(alias = "w")]
    pub weight: f64,
    #[serde(alias = "e")]
    pub norm_sinr: f64,
    #[serde(alias = "l")]
    pub norm_interference: f64,
    #[serde(default)]
    pub max_power: Option<f64>,
}

/// A single-cell problem: users plus the egress budget `I`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub budget: f64,
    pub users: Vec<InstanceUser>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub certification: solver::Certification,
    pub converged: bool,
    pub polished: bool,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

pub fn solve_instance(instance: &Instance, trace: bool) -> Result<SolveReport, CliError> {
    let mut links = Vec::with_capacity(instance.users.len());
    for (i, u) in instance.users.iter().enumerate() {
        let mut link = UserLink::new(i, u.weight, u.norm_sinr, u.norm_interference)
            .map_err(|e| CliError::Config(format!("users[{i}]: {e}")))?;
        if let Some(cap) = u.max_power {
            link = link
                .with_max_power(cap)
                .map_err(|e| CliError::Config(format!("users[{i}]: {e}")))?;
        }
        links.push(link);
    }
    let mut cfg = instance.solver.unwrap_or_default();
    cfg.trace |= trace;
    let sol = solver::solve_joint(&links, instance.budget, &cfg).map_err(|e| match e {
        SolverError::NoTransmitter | SolverError::Internal(_) => CliError::Runtime(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    let a = sol.allocation;
    Ok(SolveReport {
        x: a.x,
        p: a.p,
        lambda1: a.lambda1,
        lambda2: a.lambda2,
        objective: a.objective,
        kkt_residual: sol.kkt_residual,
        certification: sol.certification,
        converged: sol.converged,
        polished: sol.polished,
        iterations: a.iterations,
        trace: sol.trace,
    })
}

/// Solves a JSON instance file and returns the report as pretty JSON.
pub fn cmd_solve(instance_path: &Path, trace: bool) -> Result<String, CliError> {
    let text = std::fs::read_to_string(instance_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", instance_path.display())))?;
    let instance: Instance =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", instance_path.display())))?;
    let report = solve_instance(&instance, trace)?;
    serde_json::to_string_pretty(&report).map_err(runtime)
}
