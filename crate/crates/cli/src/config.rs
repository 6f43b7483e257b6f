//! Experiment configuration files.
//!
//! A TOML file with the sections `deployment`, `channel`, `scheme`, `solver`
//! and `run`. Every key is optional. Powers and densities accept either a
//! linear key (`*_w`, `*_w_hz`) or a dB key (`*_dbm`, `*_dbm_hz`); both at
//! once is an error. Overrides of the form `section.key=value` are applied
//! to the parsed document before it is interpreted.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use noiserise::simnet::{db_to_linear, ChannelConfig, DeploymentConfig, Layout, PathLossParams, Scheme, SimConfig};
use noiserise::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeployment {
    layout: Option<String>,
    rings: Option<usize>,
    rows: Option<usize>,
    cols: Option<usize>,
    isd_m: Option<f64>,
    wrap: Option<bool>,
    num_ms: Option<usize>,
    ms_per_cell: Option<usize>,
    min_ms_per_cell: Option<usize>,
    freq_mhz: Option<f64>,
    bs_height_m: Option<f64>,
    ms_height_m: Option<f64>,
    c_m: Option<f64>,
    shadowing_sigma_db: Option<f64>,
    min_distance_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    bandwidth_hz: Option<f64>,
    noise_density_w_hz: Option<f64>,
    noise_density_dbm_hz: Option<f64>,
    noise_figure_db: Option<f64>,
    noise_rise_db: Option<f64>,
    max_power_w: Option<f64>,
    max_power_dbm: Option<f64>,
    unlimited_power: Option<bool>,
    frame_duration_s: Option<f64>,
    resource_units: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    name: Option<String>,
    power_w: Option<f64>,
    power_dbm: Option<f64>,
    target_sinr: Option<f64>,
    target_sinr_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    frames: Option<usize>,
    seed: Option<u64>,
    pf_beta: Option<f64>,
    pf_initial_bits: Option<f64>,
    calibration_tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    deployment: RawDeployment,
    #[serde(default)]
    channel: RawChannel,
    #[serde(default)]
    scheme: RawScheme,
    #[serde(default)]
    solver: Option<toml::Value>,
    #[serde(default)]
    run: RawRun,
}

/// Scheduler selection. A fixed-power scheme without an explicit power is
/// calibrated against the noise-rise scheme's mean ingress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SchemeSpec {
    Nr,
    NrDensity,
    NrDensityCapped,
    Fixed { power_w: Option<f64> },
    TargetSinr { target_sinr: f64 },
}

pub const SCHEME_NAMES: [&str; 5] = ["nr", "nr_density", "nr_density_capped", "fixed", "target_sinr"];

/// 10 dB.
pub const DEFAULT_TARGET_SINR: f64 = 10.0;

impl SchemeSpec {
    pub fn parse_name(name: &str) -> Result<Self, ConfigError> {
        Ok(match name {
            "nr" => SchemeSpec::Nr,
            "nr_density" => SchemeSpec::NrDensity,
            "nr_density_capped" => SchemeSpec::NrDensityCapped,
            "fixed" => SchemeSpec::Fixed { power_w: None },
            "target_sinr" => SchemeSpec::TargetSinr {
                target_sinr: DEFAULT_TARGET_SINR,
            },
            other => {
                return err(format!(
                    "scheme.name: unknown scheme `{other}` (expected one of {})",
                    SCHEME_NAMES.join(", ")
                ))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeSpec::Nr => "nr",
            SchemeSpec::NrDensity => "nr_density",
            SchemeSpec::NrDensityCapped => "nr_density_capped",
            SchemeSpec::Fixed { .. } => "fixed",
            SchemeSpec::TargetSinr { .. } => "target_sinr",
        }
    }

    /// The simulator scheme, if no calibration is needed.
    pub fn resolved(&self) -> Option<Scheme> {
        Some(match *self {
            SchemeSpec::Nr => Scheme::NoiseRise,
            SchemeSpec::NrDensity => Scheme::NoiseRiseDensity,
            SchemeSpec::NrDensityCapped => Scheme::NoiseRiseDensityCapped,
            SchemeSpec::Fixed { power_w } => Scheme::FixedPower { power_w: power_w? },
            SchemeSpec::TargetSinr { target_sinr } => Scheme::TargetSinr { target_sinr },
        })
    }
}

/// Fully interpreted experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub scheme: SchemeSpec,
    pub calibration_tolerance: f64,
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON form of the interpreted configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn either(
    linear: Option<f64>,
    db: Option<f64>,
    linear_key: &str,
    db_key: &str,
    offset_db: f64,
) -> Result<Option<f64>, ConfigError> {
    match (linear, db) {
        (Some(_), Some(_)) => err(format!("{linear_key} and {db_key} are mutually exclusive")),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(d)) => Ok(Some(db_to_linear(d + offset_db))),
        (None, None) => Ok(None),
    }
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies `section.key=value` overrides to a TOML document.
pub fn apply_overrides(doc: &mut toml::Table, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let Some((path, value)) = item.split_once('=') else {
            return err(format!("override `{item}` is not of the form section.key=value"));
        };
        let Some((section, key)) = path.trim().split_once('.') else {
            return err(format!("override `{item}` needs a section.key path"));
        };
        let table = doc
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let Some(table) = table.as_table_mut() else {
            return err(format!("{section} is not a section"));
        };
        table.insert(key.trim().to_string(), override_value(value.trim()));
    }
    Ok(())
}

pub fn parse_document(text: &str) -> Result<toml::Table, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
}

pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut doc = parse_document(&text)?;
    apply_overrides(&mut doc, overrides)?;
    interpret(doc)
}

/// Interprets a parsed (and overridden) document.
pub fn interpret(doc: toml::Table) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError(format!("config: {}", e.message())))?;

    let d = raw.deployment;
    let layout = match d.layout.as_deref().unwrap_or("hex_rings") {
        "hex_rings" => {
            if d.rows.is_some() || d.cols.is_some() {
                return err("deployment.rows/cols only apply to layout = \"grid\"");
            }
            Layout::HexRings { rings: d.rings.unwrap_or(2) }
        }
        "grid" => {
            if d.rings.is_some() {
                return err("deployment.rings only applies to layout = \"hex_rings\"");
            }
            match (d.rows, d.cols) {
                (Some(rows), Some(cols)) => Layout::Grid { rows, cols },
                _ => return err("deployment.layout = \"grid\" needs rows and cols"),
            }
        }
        other => return err(format!("deployment.layout: unknown layout `{other}` (expected hex_rings or grid)")),
    };
    let pl_default = PathLossParams::default();
    let dep_default = DeploymentConfig::default();
    let num_ms = match (d.num_ms, d.ms_per_cell) {
        (Some(_), Some(_)) => return err("deployment.num_ms and deployment.ms_per_cell are mutually exclusive"),
        (Some(n), None) => n,
        (None, Some(k)) => k * layout.num_cells(),
        (None, None) => 10 * layout.num_cells(),
    };
    let deployment = DeploymentConfig {
        layout,
        isd_m: d.isd_m.unwrap_or(dep_default.isd_m),
        wrap: d.wrap.unwrap_or(dep_default.wrap),
        num_ms,
        min_ms_per_cell: d.min_ms_per_cell.unwrap_or(dep_default.min_ms_per_cell),
        pathloss: PathLossParams {
            freq_mhz: d.freq_mhz.unwrap_or(pl_default.freq_mhz),
            bs_height_m: d.bs_height_m.unwrap_or(pl_default.bs_height_m),
            ms_height_m: d.ms_height_m.unwrap_or(pl_default.ms_height_m),
            c_m: d.c_m.unwrap_or(pl_default.c_m),
            shadowing_sigma_db: d.shadowing_sigma_db.unwrap_or(pl_default.shadowing_sigma_db),
            min_distance_m: d.min_distance_m.unwrap_or(pl_default.min_distance_m),
        },
    };

    let c = raw.channel;
    let ch_default = ChannelConfig::default();
    let noise_density_w_hz = match (c.noise_density_w_hz, c.noise_density_dbm_hz) {
        (Some(_), Some(_)) => return err("channel.noise_density_w_hz and channel.noise_density_dbm_hz are mutually exclusive"),
        (Some(_), None) if c.noise_figure_db.is_some() => {
            return err("channel.noise_figure_db only applies with channel.noise_density_dbm_hz")
        }
        (Some(w), None) => w,
        (None, dbm) => {
            let dbm = dbm.unwrap_or(-174.0) + c.noise_figure_db.unwrap_or(5.0);
            db_to_linear(dbm - 30.0)
        }
    };
    let max_power = either(c.max_power_w, c.max_power_dbm, "channel.max_power_w", "channel.max_power_dbm", -30.0)?;
    let max_power_w = if c.unlimited_power.unwrap_or(false) {
        if max_power.is_some() {
            return err("channel.unlimited_power conflicts with an explicit max power");
        }
        None
    } else {
        max_power.or(ch_default.max_power_w)
    };
    let channel = ChannelConfig {
        bandwidth_hz: c.bandwidth_hz.unwrap_or(ch_default.bandwidth_hz),
        noise_density_w_hz,
        noise_rise_db: c.noise_rise_db.unwrap_or(ch_default.noise_rise_db),
        max_power_w,
        frame_duration_s: c.frame_duration_s.unwrap_or(ch_default.frame_duration_s),
        resource_units: match c.resource_units {
            Some(0) => None,
            other => other,
        },
    };

    let s = raw.scheme;
    let mut scheme = SchemeSpec::parse_name(s.name.as_deref().unwrap_or("nr"))?;
    let power = either(s.power_w, s.power_dbm, "scheme.power_w", "scheme.power_dbm", -30.0)?;
    let target = either(s.target_sinr, s.target_sinr_db, "scheme.target_sinr", "scheme.target_sinr_db", 0.0)?;
    match &mut scheme {
        SchemeSpec::Fixed { power_w } => *power_w = power,
        SchemeSpec::TargetSinr { target_sinr } => {
            if let Some(t) = target {
                *target_sinr = t;
            }
        }
        _ => {}
    }
    if power.is_some() && !matches!(scheme, SchemeSpec::Fixed { .. }) {
        return err(format!("scheme.power_w/power_dbm do not apply to scheme `{}`", scheme.name()));
    }
    if target.is_some() && !matches!(scheme, SchemeSpec::TargetSinr { .. }) {
        return err(format!("scheme.target_sinr/target_sinr_db do not apply to scheme `{}`", scheme.name()));
    }
    if let SchemeSpec::Fixed { power_w: Some(p) } = scheme {
        if !(p.is_finite() && p > 0.0) {
            return err(format!("scheme.power_w must be > 0, got {p}"));
        }
    }
    if let SchemeSpec::TargetSinr { target_sinr } = scheme {
        if !(target_sinr.is_finite() && target_sinr > 0.0) {
            return err(format!("scheme.target_sinr must be > 0, got {target_sinr}"));
        }
    }

    let solver: SolverConfig = match raw.solver {
        Some(v) => v
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError(format!("solver: {}", e.message())))?,
        None => SolverConfig::default(),
    };

    let r = raw.run;
    let sim_default = SimConfig::default();
    let sim = SimConfig {
        deployment,
        channel,
        solver,
        frames: r.frames.unwrap_or(sim_default.frames),
        pf_beta: r.pf_beta.unwrap_or(sim_default.pf_beta),
        pf_initial_bits: r.pf_initial_bits.unwrap_or(sim_default.pf_initial_bits),
        seed: r.seed.unwrap_or(sim_default.seed),
    };
    sim.validate().map_err(|e| ConfigError(e.to_string()))?;
    if sim.frames == 0 {
        return err("run.frames must be >= 1");
    }
    let calibration_tolerance = r.calibration_tolerance.unwrap_or(0.02);
    if !(calibration_tolerance.is_finite() && calibration_tolerance > 0.0) {
        return err(format!("run.calibration_tolerance must be > 0, got {calibration_tolerance}"));
    }
    Ok(ExperimentConfig {
        sim,
        scheme,
        calibration_tolerance,
    })
}
