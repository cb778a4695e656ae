//! Scenario and sweep files (TOML). Physical quantities carry their unit in
//! the key name.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use mis_core::closed_form::LatticeOrigin;
use mis_core::geometry::{Direction, MisGeometry};
use mis_core::{RalmConfig, TargetScene};
use serde::{Deserialize, Serialize};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Marks errors that should exit with the config-error code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ralm,
    ClosedForm,
    Both,
}

impl Method {
    pub fn runs_ralm(self) -> bool {
        matches!(self, Self::Ralm | Self::Both)
    }

    pub fn runs_closed_form(self) -> bool {
        matches!(self, Self::ClosedForm | Self::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub ms1_rows: usize,
    pub ms1_cols: usize,
    pub ms2_rows: usize,
    pub ms2_cols: usize,
    #[serde(default = "default_spacing")]
    pub spacing_wavelengths: f64,
    #[serde(default = "default_carrier")]
    pub carrier_ghz: f64,
}

fn default_spacing() -> f64 {
    1.0 / 3.0
}

fn default_carrier() -> f64 {
    12.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub azimuth_count: usize,
    pub elevation_count: usize,
    pub azimuth_lo_deg: f64,
    pub azimuth_hi_deg: f64,
    pub elevation_lo_deg: f64,
    pub elevation_hi_deg: f64,
    pub echo_snr_db: f64,
    pub power_dbm: f64,
    pub bs_antennas: usize,
    pub bs_azimuth_deg: f64,
    pub bs_elevation_deg: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            azimuth_count: 2,
            elevation_count: 2,
            azimuth_lo_deg: 0.0,
            azimuth_hi_deg: 90.0,
            elevation_lo_deg: 30.0,
            elevation_hi_deg: 70.0,
            echo_snr_db: -73.88,
            power_dbm: 30.0,
            bs_antennas: 1,
            bs_azimuth_deg: 0.0,
            bs_elevation_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub method: Method,
    pub output_dir: Option<String>,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            method: Method::Ralm,
            output_dir: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClosedFormConfig {
    /// Template curvature in rad/m²; the lattice fallback when absent.
    pub curvature_rad_per_m2: Option<f64>,
    pub origin: LatticeOrigin,
}

impl Default for ClosedFormConfig {
    fn default() -> Self {
        Self {
            curvature_rad_per_m2: None,
            origin: LatticeOrigin::Corner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamMapConfig {
    pub azimuth_points: usize,
    pub elevation_points: usize,
    pub azimuth_lo_deg: f64,
    pub azimuth_hi_deg: f64,
    pub elevation_lo_deg: f64,
    pub elevation_hi_deg: f64,
}

impl Default for BeamMapConfig {
    fn default() -> Self {
        Self {
            azimuth_points: 181,
            elevation_points: 91,
            azimuth_lo_deg: -90.0,
            azimuth_hi_deg: 90.0,
            elevation_lo_deg: 0.0,
            elevation_hi_deg: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub levels: usize,
    /// Allowed shortfall of the solver below the oracle.
    pub gap_db: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            levels: 16,
            gap_db: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub points: usize,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            points: 20,
            step: 1e-6,
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub solver: RalmConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub closed_form: ClosedFormConfig,
    #[serde(default)]
    pub beam_map: BeamMapConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub gradcheck: GradcheckConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PowerDbm,
    Ms2Size,
    Ms1Size,
    TargetCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// Seeds tried per value; the best result is kept. Defaults to the run seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(flatten)]
    pub base: ScenarioConfig,
    pub sweep: SweepSection,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = read(path)?;
    let cfg: ScenarioConfig = toml::from_str(&text)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec> {
    let text = read(path)?;
    let spec: SweepSpec = toml::from_str(&text)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| config_err(format!("{e:#}")))
}

/// Largest divisor of `k` not above `√k`.
pub fn grid_factor(k: usize) -> usize {
    (1..=k).filter(|d| d * d <= k && k.is_multiple_of(*d)).max().unwrap_or(1)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.carrier_ghz > 0.0 && g.carrier_ghz.is_finite()) {
            return Err(config_err("geometry.carrier_ghz must be > 0"));
        }
        if !(g.spacing_wavelengths > 0.0 && g.spacing_wavelengths.is_finite()) {
            return Err(config_err("geometry.spacing_wavelengths must be > 0"));
        }
        if g.ms1_rows == 0 || g.ms1_cols == 0 {
            return Err(config_err("geometry: MS1 needs at least one element"));
        }
        let s = &self.scene;
        if s.azimuth_count == 0 || s.elevation_count == 0 {
            return Err(config_err("scene: azimuth_count and elevation_count must be >= 1"));
        }
        if !(s.azimuth_lo_deg <= s.azimuth_hi_deg) {
            return Err(config_err("scene: azimuth_lo_deg must not exceed azimuth_hi_deg"));
        }
        if !(0.0 <= s.elevation_lo_deg && s.elevation_lo_deg <= s.elevation_hi_deg && s.elevation_hi_deg <= 90.0) {
            return Err(config_err("scene: need 0 <= elevation_lo_deg <= elevation_hi_deg <= 90"));
        }
        let b = &self.beam_map;
        if b.azimuth_points == 0 || b.elevation_points == 0 {
            return Err(config_err("beam_map: grid must have at least one point per axis"));
        }
        if !(0.0 <= b.elevation_lo_deg && b.elevation_lo_deg <= b.elevation_hi_deg && b.elevation_hi_deg <= 90.0) {
            return Err(config_err("beam_map: need 0 <= elevation_lo_deg <= elevation_hi_deg <= 90"));
        }
        if self.run.workers == 0 {
            return Err(config_err("run.workers must be >= 1"));
        }
        if self.gradcheck.points == 0 || !(self.gradcheck.step > 0.0) || !(self.gradcheck.tolerance >= 0.0) {
            return Err(config_err("gradcheck: need points >= 1, step > 0, tolerance >= 0"));
        }
        if let Some(a) = self.closed_form.curvature_rad_per_m2 {
            if !(a > 0.0 && a.is_finite()) {
                return Err(config_err("closed_form.curvature_rad_per_m2 must be > 0"));
            }
        }
        self.solver_config()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        self.geometry_model().map_err(|e| config_err(format!("geometry: {e}")))?;
        self.scene_model().map_err(|e| config_err(format!("scene: {e}")))?;
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / (self.geometry.carrier_ghz * 1e9)
    }

    pub fn geometry_model(&self) -> mis_core::Result<MisGeometry> {
        let g = &self.geometry;
        let lambda = self.wavelength();
        MisGeometry::new(g.ms1_rows, g.ms1_cols, g.ms2_rows, g.ms2_cols, g.spacing_wavelengths * lambda, lambda)
    }

    /// Targets ordered elevation-major over the configured grid.
    pub fn target_directions(&self) -> mis_core::Result<Vec<Direction>> {
        let s = &self.scene;
        let mut dirs = Vec::with_capacity(s.azimuth_count * s.elevation_count);
        for el in linspace(s.elevation_lo_deg, s.elevation_hi_deg, s.elevation_count) {
            for az in linspace(s.azimuth_lo_deg, s.azimuth_hi_deg, s.azimuth_count) {
                dirs.push(Direction::from_degrees(az, el)?);
            }
        }
        Ok(dirs)
    }

    pub fn scene_model(&self) -> mis_core::Result<TargetScene> {
        let s = &self.scene;
        let bs = Direction::from_degrees(s.bs_azimuth_deg, s.bs_elevation_deg)?;
        TargetScene::from_echo_snr(&self.target_directions()?, s.echo_snr_db, s.power_dbm, s.bs_antennas, bs)
    }

    /// Solver settings with the run seed applied.
    pub fn solver_config(&self) -> RalmConfig {
        RalmConfig {
            seed: self.run.seed,
            ..self.solver.clone()
        }
    }

    pub fn beam_grid(&self) -> mis_core::Result<Vec<Direction>> {
        let b = &self.beam_map;
        mis_core::echo::angular_grid(
            (b.azimuth_lo_deg, b.azimuth_hi_deg),
            b.azimuth_points,
            (b.elevation_lo_deg, b.elevation_hi_deg),
            b.elevation_points,
        )
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Copy with one sweep variable set to `value`.
    pub fn with_sweep_value(&self, variable: SweepVariable, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v <= 1e6 {
                Ok(v as usize)
            } else {
                Err(config_err(format!("sweep value {v} must be a positive integer")))
            }
        };
        match variable {
            SweepVariable::PowerDbm => {
                if !value.is_finite() {
                    return Err(config_err("power must be finite"));
                }
                cfg.scene.power_dbm = value;
            }
            SweepVariable::Ms2Size => {
                let n = as_count(value)?;
                cfg.geometry.ms2_rows = n;
                cfg.geometry.ms2_cols = n;
            }
            SweepVariable::Ms1Size => {
                let m = as_count(value)?;
                cfg.geometry.ms1_rows = m;
                cfg.geometry.ms1_cols = m;
            }
            SweepVariable::TargetCount => {
                let k = as_count(value)?;
                let az = grid_factor(k);
                cfg.scene.azimuth_count = az;
                cfg.scene.elevation_count = k / az;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.sweep.values.is_empty() {
            return Err(config_err("sweep.values must not be empty"));
        }
        let mut sorted = self.sweep.values.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("sweep.values must be distinct"));
        }
        for &v in &self.sweep.values {
            self.base.with_sweep_value(self.sweep.variable, v)?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.sweep.seeds.is_empty() {
            vec![self.base.run.seed]
        } else {
            self.sweep.seeds.clone()
        }
    }
}
