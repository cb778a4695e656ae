//! Post-matched-filter echo model: beam gains, multi-target interference and
//! per-target sensing SINR for every (target, pattern) pair.
//!
//! The double-hop echo squares the beam gain, so with `a_{k,u} = |c_kᵀ v_u|²`
//!
//! ```text
//! SINR_{k,u} = β_k² a_{k,u}² / (Σ_{i≠k} β_i² a_{i,u}² + σ_k² / (P L²))
//! ```

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, MisError, Result};
use crate::geometry::{coupling_vector, effective_v, CouplingVector, Direction, MisGeometry, OverlapPattern};
use crate::units::{db_to_amplitude, dbm_to_watts, linear_to_db};

/// One candidate target direction with its echo amplitude and noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Target {
    pub direction: Direction,
    pub beta: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetScene {
    targets: Vec<Target>,
    mis_incident: Direction,
    tx_power: f64,
    bs_antennas: usize,
}

impl TargetScene {
    /// `tx_power` in watts.
    pub fn new(
        targets: Vec<Target>,
        mis_incident: Direction,
        tx_power: f64,
        bs_antennas: usize,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(MisError::InvalidInput("scene needs at least one target".into()));
        }
        for (k, t) in targets.iter().enumerate() {
            if !(t.beta.is_finite() && t.beta > 0.0 && t.sigma.is_finite() && t.sigma > 0.0) {
                return Err(MisError::InvalidInput(format!(
                    "target {k}: beta and sigma must be positive and finite"
                )));
            }
        }
        if !(tx_power.is_finite() && tx_power > 0.0) {
            return Err(MisError::InvalidInput(format!("transmit power must be > 0, got {tx_power}")));
        }
        if bs_antennas == 0 {
            return Err(MisError::InvalidInput("at least one BS antenna required".into()));
        }
        Ok(Self {
            targets,
            mis_incident,
            tx_power,
            bs_antennas,
        })
    }

    /// Scene with a common echo SNR `β²/σ²` (σ = 1) and power in dBm.
    pub fn from_echo_snr(
        directions: &[Direction],
        echo_snr_db: f64,
        power_dbm: f64,
        bs_antennas: usize,
        mis_incident: Direction,
    ) -> Result<Self> {
        let beta = db_to_amplitude(echo_snr_db);
        let targets = directions
            .iter()
            .map(|&direction| Target {
                direction,
                beta,
                sigma: 1.0,
            })
            .collect();
        Self::new(targets, mis_incident, dbm_to_watts(power_dbm), bs_antennas)
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn k(&self) -> usize {
        self.targets.len()
    }

    pub fn mis_incident(&self) -> Direction {
        self.mis_incident
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn bs_antennas(&self) -> usize {
        self.bs_antennas
    }

    /// Same scene with a different transmit power (watts).
    pub fn with_tx_power(&self, tx_power: f64) -> Result<Self> {
        Self::new(self.targets.clone(), self.mis_incident, tx_power, self.bs_antennas)
    }

    /// Same scene with the targets reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_len("permutation", self.k(), order.len())?;
        let targets = order.iter().map(|&i| self.targets[i]).collect();
        Self::new(targets, self.mis_incident, self.tx_power, self.bs_antennas)
    }

    /// Noise term `σ_k² / (P L²)` of target `k`.
    pub fn noise_term(&self, k: usize) -> f64 {
        let l = self.bs_antennas as f64;
        self.targets[k].sigma.powi(2) / (self.tx_power * l * l)
    }

    /// `β_k² M⁴ P L² / σ_k²`: SINR of a lone target under a perfectly matched aperture.
    pub fn single_target_bound(&self, k: usize, m: usize) -> f64 {
        let m2 = (m * m) as f64;
        self.targets[k].beta.powi(2) * m2 * m2 / self.noise_term(k)
    }
}

/// Static phases of both layers (unit-modulus).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PhaseRecord", try_from = "PhaseRecord")]
pub struct PhaseDesign {
    pub phi: Vec<Complex64>,
    pub theta: Vec<Complex64>,
}

/// Radian representation used on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PhaseRecord {
    phi_rad: Vec<f64>,
    theta_rad: Vec<f64>,
}

impl From<PhaseDesign> for PhaseRecord {
    fn from(d: PhaseDesign) -> Self {
        Self {
            phi_rad: d.phi_radians(),
            theta_rad: d.theta_radians(),
        }
    }
}

impl TryFrom<PhaseRecord> for PhaseDesign {
    type Error = MisError;

    fn try_from(r: PhaseRecord) -> Result<Self> {
        PhaseDesign::from_radians(&r.phi_rad, &r.theta_rad)
    }
}

fn wrapped_args(x: &[Complex64]) -> Vec<f64> {
    x.iter().map(|z| z.arg().rem_euclid(std::f64::consts::TAU)).collect()
}

impl PhaseDesign {
    /// Rejects entries whose modulus deviates from one by more than 1e-9.
    pub fn new(phi: Vec<Complex64>, theta: Vec<Complex64>) -> Result<Self> {
        for (what, x) in [("phi", &phi), ("theta", &theta)] {
            if let Some(i) = x.iter().position(|z| !((z.norm() - 1.0).abs() <= 1e-9)) {
                return Err(MisError::InvalidInput(format!("{what}[{i}] is not unit-modulus")));
            }
        }
        Ok(Self { phi, theta })
    }

    pub fn from_radians(phi: &[f64], theta: &[f64]) -> Result<Self> {
        if phi.iter().chain(theta).any(|p| !p.is_finite()) {
            return Err(MisError::InvalidInput("non-finite phase".into()));
        }
        Ok(Self {
            phi: phi.iter().map(|&p| Complex64::from_polar(1.0, p)).collect(),
            theta: theta.iter().map(|&p| Complex64::from_polar(1.0, p)).collect(),
        })
    }

    pub fn ones(m: usize, n: usize) -> Self {
        Self {
            phi: vec![Complex64::new(1.0, 0.0); m],
            theta: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// MS1 phases wrapped to `[0, 2π)`.
    pub fn phi_radians(&self) -> Vec<f64> {
        wrapped_args(&self.phi)
    }

    /// MS2 phases wrapped to `[0, 2π)`.
    pub fn theta_radians(&self) -> Vec<f64> {
        wrapped_args(&self.theta)
    }

    fn check(&self, geom: &MisGeometry) -> Result<()> {
        check_len("phi", geom.m(), self.phi.len())?;
        check_len("theta", geom.n(), self.theta.len())
    }
}

/// One beam pattern per target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub assignment: Vec<usize>,
}

impl Schedule {
    pub fn new(assignment: Vec<usize>, u: usize) -> Result<Self> {
        if let Some(&bad) = assignment.iter().find(|&&x| x >= u) {
            return Err(MisError::IndexOutOfRange {
                what: "pattern",
                index: bad,
                limit: u,
            });
        }
        Ok(Self { assignment })
    }

    pub fn uniform(k: usize, u: usize) -> Self {
        Self {
            assignment: vec![u; k],
        }
    }

    pub fn pattern(&self, k: usize) -> usize {
        self.assignment[k]
    }
}

/// `|cᵀ v|²`.
pub fn beam_gain(v: &[Complex64], c: &CouplingVector) -> Result<f64> {
    check_len("v", c.values.len(), v.len())?;
    Ok(c.values.iter().zip(v).map(|(a, b)| a * b).sum::<Complex64>().norm_sqr())
}

/// Complex beam responses `s_{k,u} = c_kᵀ v_u` and gains `a_{k,u} = |s_{k,u}|²`
/// for every target/pattern pair, stored row-major by target.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    pub k: usize,
    pub u: usize,
    pub response: Vec<Complex64>,
    pub gain: Vec<f64>,
}

impl ResponseTable {
    #[inline]
    pub fn gain(&self, k: usize, u: usize) -> f64 {
        self.gain[k * self.u + u]
    }

    #[inline]
    pub fn response(&self, k: usize, u: usize) -> Complex64 {
        self.response[k * self.u + u]
    }
}

/// Scene and geometry with the coupling vectors and overlap patterns
/// precomputed; the evaluation workhorse for solvers and sweeps.
#[derive(Debug, Clone)]
pub struct EchoModel {
    geom: MisGeometry,
    scene: TargetScene,
    patterns: Vec<OverlapPattern>,
    couplings: Vec<CouplingVector>,
    beta_sq: Vec<f64>,
    noise: Vec<f64>,
}

impl EchoModel {
    pub fn new(scene: &TargetScene, geom: &MisGeometry) -> Result<Self> {
        let couplings = scene
            .targets()
            .iter()
            .enumerate()
            .map(|(k, t)| coupling_vector(geom, scene.mis_incident(), t.direction, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geom: geom.clone(),
            scene: scene.clone(),
            patterns: geom.patterns(),
            couplings,
            beta_sq: scene.targets().iter().map(|t| t.beta * t.beta).collect(),
            noise: (0..scene.k()).map(|k| scene.noise_term(k)).collect(),
        })
    }

    pub fn geometry(&self) -> &MisGeometry {
        &self.geom
    }

    pub fn scene(&self) -> &TargetScene {
        &self.scene
    }

    pub fn patterns(&self) -> &[OverlapPattern] {
        &self.patterns
    }

    pub fn couplings(&self) -> &[CouplingVector] {
        &self.couplings
    }

    pub fn k(&self) -> usize {
        self.couplings.len()
    }

    pub fn u(&self) -> usize {
        self.patterns.len()
    }

    pub fn beta_sq(&self, k: usize) -> f64 {
        self.beta_sq[k]
    }

    pub fn noise(&self, k: usize) -> f64 {
        self.noise[k]
    }

    /// Responses of every pair in `O(K (M + U N))`, using
    /// `c_kᵀ v_u = Σ_m c_m φ_m + Σ_n c_{m(n)} φ_{m(n)} (θ_n - 1)`.
    pub fn responses(&self, phi: &[Complex64], theta: &[Complex64]) -> ResponseTable {
        let (k_count, u_count) = (self.k(), self.u());
        let mut response = Vec::with_capacity(k_count * u_count);
        let mut weighted = vec![Complex64::new(0.0, 0.0); phi.len()];
        let theta_minus_one: Vec<Complex64> = theta.iter().map(|t| t - 1.0).collect();
        for c in &self.couplings {
            for (w, (a, p)) in weighted.iter_mut().zip(c.values.iter().zip(phi)) {
                *w = a * p;
            }
            let total: Complex64 = weighted.iter().sum();
            for pat in &self.patterns {
                let delta: Complex64 = pat
                    .ms1_index
                    .iter()
                    .zip(&theta_minus_one)
                    .map(|(&m, t)| weighted[m] * t)
                    .sum();
                response.push(total + delta);
            }
        }
        let gain = response.iter().map(|s| s.norm_sqr()).collect();
        ResponseTable {
            k: k_count,
            u: u_count,
            response,
            gain,
        }
    }

    pub fn design_responses(&self, design: &PhaseDesign) -> Result<ResponseTable> {
        design.check(&self.geom)?;
        Ok(self.responses(&design.phi, &design.theta))
    }

    /// Interference-plus-noise denominator of target `k` under pattern `u`.
    pub fn interference_plus_noise(&self, table: &ResponseTable, k: usize, u: usize) -> f64 {
        let interference: f64 = (0..self.k())
            .filter(|&i| i != k)
            .map(|i| self.beta_sq[i] * table.gain(i, u).powi(2))
            .sum();
        interference + self.noise[k]
    }

    pub fn sinr_from_table(&self, table: &ResponseTable, k: usize, u: usize) -> f64 {
        self.beta_sq[k] * table.gain(k, u).powi(2) / self.interference_plus_noise(table, k, u)
    }

    /// Full `K × U` SINR table (linear).
    pub fn sinr_table(&self, design: &PhaseDesign) -> Result<Vec<Vec<f64>>> {
        let table = self.design_responses(design)?;
        Ok((0..self.k())
            .map(|k| (0..self.u()).map(|u| self.sinr_from_table(&table, k, u)).collect())
            .collect())
    }

    pub fn sinr(&self, k: usize, u: usize, design: &PhaseDesign) -> Result<f64> {
        self.check_indices(k, u)?;
        let table = self.design_responses(design)?;
        Ok(self.sinr_from_table(&table, k, u))
    }

    /// SINR of each target under its scheduled pattern.
    pub fn scheduled_sinrs(&self, design: &PhaseDesign, sched: &Schedule) -> Result<Vec<f64>> {
        check_len("schedule", self.k(), sched.assignment.len())?;
        let table = self.design_responses(design)?;
        (0..self.k())
            .map(|k| {
                let u = sched.pattern(k);
                self.check_indices(k, u)?;
                Ok(self.sinr_from_table(&table, k, u))
            })
            .collect()
    }

    pub fn min_sinr(&self, design: &PhaseDesign, sched: &Schedule) -> Result<f64> {
        Ok(self
            .scheduled_sinrs(design, sched)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    /// Per-target argmax of SINR over patterns, ties to the smallest index.
    pub fn best_schedule(&self, design: &PhaseDesign) -> Result<Schedule> {
        let table = self.design_responses(design)?;
        Ok(self.best_schedule_from_table(&table))
    }

    pub fn best_schedule_from_table(&self, table: &ResponseTable) -> Schedule {
        let assignment = (0..self.k())
            .map(|k| {
                let mut best = (0, f64::NEG_INFINITY);
                for u in 0..self.u() {
                    let s = self.sinr_from_table(table, k, u);
                    if s > best.1 {
                        best = (u, s);
                    }
                }
                best.0
            })
            .collect();
        Schedule { assignment }
    }

    /// `min_k max_u SINR_{k,u}`: the max-min value of a design under its best schedule.
    pub fn max_min_sinr(&self, design: &PhaseDesign) -> Result<f64> {
        let sched = self.best_schedule(design)?;
        self.min_sinr(design, &sched)
    }

    fn check_indices(&self, k: usize, u: usize) -> Result<()> {
        if k >= self.k() {
            return Err(MisError::IndexOutOfRange {
                what: "target",
                index: k,
                limit: self.k(),
            });
        }
        if u >= self.u() {
            return Err(MisError::IndexOutOfRange {
                what: "pattern",
                index: u,
                limit: self.u(),
            });
        }
        Ok(())
    }
}

pub fn sinr(
    k: usize,
    u: usize,
    design: &PhaseDesign,
    scene: &TargetScene,
    geom: &MisGeometry,
) -> Result<f64> {
    EchoModel::new(scene, geom)?.sinr(k, u, design)
}

pub fn min_sinr(
    design: &PhaseDesign,
    sched: &Schedule,
    scene: &TargetScene,
    geom: &MisGeometry,
) -> Result<f64> {
    EchoModel::new(scene, geom)?.min_sinr(design, sched)
}

pub fn best_schedule(design: &PhaseDesign, scene: &TargetScene, geom: &MisGeometry) -> Result<Schedule> {
    EchoModel::new(scene, geom)?.best_schedule(design)
}

/// One beam-map sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamSample {
    pub direction: Direction,
    pub gain_db: f64,
}

/// Lowest value reported in a normalized map.
pub const BEAM_MAP_FLOOR_DB: f64 = -300.0;

/// Uniform grid, azimuth-major, over `azimuth ∈ [az_lo, az_hi]` and
/// `elevation ∈ [el_lo, el_hi]` (degrees, inclusive endpoints).
pub fn angular_grid(
    azimuth_deg: (f64, f64),
    azimuth_points: usize,
    elevation_deg: (f64, f64),
    elevation_points: usize,
) -> Result<Vec<Direction>> {
    let axis = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
        match n {
            0 => vec![],
            1 => vec![0.5 * (lo + hi)],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    };
    let mut grid = Vec::with_capacity(azimuth_points * elevation_points);
    for az in axis(azimuth_deg, azimuth_points) {
        for el in axis(elevation_deg, elevation_points) {
            grid.push(Direction::from_degrees(az, el)?);
        }
    }
    Ok(grid)
}

/// The 181 × 91 hemisphere grid: azimuth −90°..90°, elevation 0°..90° at 1°.
pub fn default_beam_grid() -> Vec<Direction> {
    angular_grid((-90.0, 90.0), 181, (0.0, 90.0), 91).expect("static grid is valid")
}

/// Normalized gain `|c(dir)ᵀ v_u|²` over `grid`, in dB relative to the grid maximum.
pub fn beam_map(
    design: &PhaseDesign,
    u: usize,
    geom: &MisGeometry,
    mis_incident: Direction,
    grid: &[Direction],
) -> Result<Vec<BeamSample>> {
    if grid.is_empty() {
        return Err(MisError::EmptyGrid);
    }
    design.check(geom)?;
    let pat = geom.overlap_pattern(u)?;
    let v = effective_v(&design.phi, &design.theta, &pat)?;
    let gains = grid
        .par_iter()
        .map(|&dir| {
            let c = coupling_vector(geom, mis_incident, dir, 0)?;
            beam_gain(&v, &c)
        })
        .collect::<Result<Vec<f64>>>()?;
    let peak = gains.iter().copied().fold(0.0, f64::max);
    Ok(grid
        .iter()
        .zip(gains)
        .map(|(&direction, g)| {
            let gain_db = if peak > 0.0 {
                linear_to_db(g / peak).max(BEAM_MAP_FLOOR_DB)
            } else {
                0.0
            };
            BeamSample { direction, gain_db }
        })
        .collect())
}
