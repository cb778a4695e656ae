//! Panel geometry of the two-layer surface: the fixed layer (MS1, `M` elements)
//! and the sliding layer (MS2, `N` elements) that can sit at any of `U`
//! discrete overlap offsets.
//!
//! All indices are zero-based. Element `(r, c)` of a panel with `cols`
//! columns has flat index `r * cols + c`, and pattern `(row_offset,
//! col_offset)` has flat index `row_offset * lattice_cols + col_offset`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_len, MisError, Result};

/// Dimensions and spacing of both layers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisGeometry {
    ms1_rows: usize,
    ms1_cols: usize,
    ms2_rows: usize,
    ms2_cols: usize,
    spacing: f64,
    wavelength: f64,
}

impl MisGeometry {
    /// `spacing` and `wavelength` are in meters.
    pub fn new(
        ms1_rows: usize,
        ms1_cols: usize,
        ms2_rows: usize,
        ms2_cols: usize,
        spacing: f64,
        wavelength: f64,
    ) -> Result<Self> {
        if ms2_rows == 0 || ms2_cols == 0 {
            return Err(MisError::InvalidInput("MS2 must have at least one element".into()));
        }
        if ms2_rows > ms1_rows || ms2_cols > ms1_cols {
            return Err(MisError::InvalidInput(format!(
                "MS2 ({ms2_rows}x{ms2_cols}) must fit inside MS1 ({ms1_rows}x{ms1_cols})"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(MisError::InvalidInput(format!("element spacing must be > 0, got {spacing}")));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(MisError::InvalidInput(format!("wavelength must be > 0, got {wavelength}")));
        }
        Ok(Self {
            ms1_rows,
            ms1_cols,
            ms2_rows,
            ms2_cols,
            spacing,
            wavelength,
        })
    }

    pub fn ms1_rows(&self) -> usize {
        self.ms1_rows
    }

    pub fn ms1_cols(&self) -> usize {
        self.ms1_cols
    }

    pub fn ms2_rows(&self) -> usize {
        self.ms2_rows
    }

    pub fn ms2_cols(&self) -> usize {
        self.ms2_cols
    }

    /// Element spacing in meters.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Wavenumber `2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength
    }

    /// Number of MS1 elements.
    pub fn m(&self) -> usize {
        self.ms1_rows * self.ms1_cols
    }

    /// Number of MS2 elements.
    pub fn n(&self) -> usize {
        self.ms2_rows * self.ms2_cols
    }

    /// Number of row offsets MS2 can take.
    pub fn lattice_rows(&self) -> usize {
        self.ms1_rows - self.ms2_rows + 1
    }

    /// Number of column offsets MS2 can take.
    pub fn lattice_cols(&self) -> usize {
        self.ms1_cols - self.ms2_cols + 1
    }

    /// Number of beam patterns.
    pub fn u(&self) -> usize {
        self.lattice_rows() * self.lattice_cols()
    }

    /// Flat pattern index of a zero-based lattice offset.
    pub fn pattern_index(&self, row_offset: usize, col_offset: usize) -> Result<usize> {
        if row_offset >= self.lattice_rows() {
            return Err(MisError::IndexOutOfRange {
                what: "row offset",
                index: row_offset,
                limit: self.lattice_rows(),
            });
        }
        if col_offset >= self.lattice_cols() {
            return Err(MisError::IndexOutOfRange {
                what: "column offset",
                index: col_offset,
                limit: self.lattice_cols(),
            });
        }
        Ok(row_offset * self.lattice_cols() + col_offset)
    }

    /// Inverse of [`pattern_index`](Self::pattern_index).
    pub fn pattern_offsets(&self, u: usize) -> Result<(usize, usize)> {
        if u >= self.u() {
            return Err(MisError::IndexOutOfRange {
                what: "pattern",
                index: u,
                limit: self.u(),
            });
        }
        Ok((u / self.lattice_cols(), u % self.lattice_cols()))
    }

    /// Selection map and padding mask for pattern `u`.
    pub fn overlap_pattern(&self, u: usize) -> Result<OverlapPattern> {
        let (row_offset, col_offset) = self.pattern_offsets(u)?;
        let mut ms1_index = Vec::with_capacity(self.n());
        let mut padded = vec![true; self.m()];
        for nr in 0..self.ms2_rows {
            for nc in 0..self.ms2_cols {
                let m = (nr + row_offset) * self.ms1_cols + (nc + col_offset);
                ms1_index.push(m);
                padded[m] = false;
            }
        }
        Ok(OverlapPattern {
            index: u,
            row_offset,
            col_offset,
            ms1_index,
            padded,
        })
    }

    /// All `U` overlap patterns in index order.
    pub fn patterns(&self) -> Vec<OverlapPattern> {
        (0..self.u())
            .map(|u| self.overlap_pattern(u).expect("index in range"))
            .collect()
    }
}

/// A far-field direction. `elevation` is the polar angle from the surface
/// normal (0 is boresight) and `azimuth` is measured in the panel plane from
/// the row axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    /// Azimuth is wrapped into `[-π, π]`; elevation must lie in `[0, π/2]`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(MisError::InvalidInput(format!(
                "non-finite direction ({azimuth}, {elevation})"
            )));
        }
        const SLACK: f64 = 1e-12;
        if !(-SLACK..=FRAC_PI_2 + SLACK).contains(&elevation) {
            return Err(MisError::InvalidInput(format!(
                "elevation {elevation} rad outside [0, π/2]"
            )));
        }
        let mut azimuth = azimuth.rem_euclid(TAU);
        if azimuth > PI {
            azimuth -= TAU;
        }
        Ok(Self {
            azimuth,
            elevation: elevation.clamp(0.0, FRAC_PI_2),
        })
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    pub fn boresight() -> Self {
        Self {
            azimuth: 0.0,
            elevation: 0.0,
        }
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation.to_degrees()
    }

    /// Direction cosines `(sinψ cosϑ, sinψ sinϑ)` along the row and column axes.
    pub fn planar_cosines(&self) -> (f64, f64) {
        let s = self.elevation.sin();
        (s * self.azimuth.cos(), s * self.azimuth.sin())
    }
}

/// How MS2 overlays MS1 at one lattice offset.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapPattern {
    pub index: usize,
    pub row_offset: usize,
    pub col_offset: usize,
    /// `ms1_index[n]` is the MS1 element covered by MS2 element `n`.
    pub ms1_index: Vec<usize>,
    /// `padded[m]` is true when MS1 element `m` is not covered.
    pub padded: Vec<bool>,
}

impl OverlapPattern {
    pub fn n(&self) -> usize {
        self.ms1_index.len()
    }

    pub fn m(&self) -> usize {
        self.padded.len()
    }

    pub fn padded_count(&self) -> usize {
        self.padded.iter().filter(|&&p| p).count()
    }
}

/// Uniform planar array response, element `(r, c)` carrying phase
/// `2π·spacing/λ · (r cosϑ sinψ + c sinϑ sinψ)`.
pub fn upa_response(
    rows: usize,
    cols: usize,
    spacing: f64,
    wavelength: f64,
    dir: Direction,
) -> Result<Vec<Complex64>> {
    if rows == 0 || cols == 0 {
        return Err(MisError::InvalidInput("array must have at least one element".into()));
    }
    if !(spacing > 0.0 && wavelength > 0.0) {
        return Err(MisError::InvalidInput("spacing and wavelength must be positive".into()));
    }
    if !dir.azimuth.is_finite() || !dir.elevation.is_finite() {
        return Err(MisError::InvalidInput("non-finite direction".into()));
    }
    let k = TAU * spacing / wavelength;
    let (cx, cy) = dir.planar_cosines();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(Complex64::from_polar(1.0, k * (r as f64 * cx + c as f64 * cy)));
        }
    }
    Ok(out)
}

/// Padded MS2 phase vector on the MS1 grid: `S_u θ + e_u`.
pub fn equivalent_theta(pat: &OverlapPattern, theta: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len("theta", pat.n(), theta.len())?;
    let mut out = vec![Complex64::new(1.0, 0.0); pat.m()];
    for (&m, &t) in pat.ms1_index.iter().zip(theta) {
        out[m] = t;
    }
    Ok(out)
}

/// Composite phase vector `v_u = (S_u θ + e_u) ⊙ φ`.
pub fn effective_v(
    phi: &[Complex64],
    theta: &[Complex64],
    pat: &OverlapPattern,
) -> Result<Vec<Complex64>> {
    check_len("phi", pat.m(), phi.len())?;
    let mut v = equivalent_theta(pat, theta)?;
    for (x, p) in v.iter_mut().zip(phi) {
        *x *= p;
    }
    Ok(v)
}

/// Rank-one factor of a target's echo channel: `c_k = a_MIS ⊙ a_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingVector {
    pub target: usize,
    pub values: Vec<Complex64>,
}

pub fn coupling_vector(
    geom: &MisGeometry,
    mis_incident: Direction,
    target_dir: Direction,
    target: usize,
) -> Result<CouplingVector> {
    let incident = upa_response(
        geom.ms1_rows,
        geom.ms1_cols,
        geom.spacing,
        geom.wavelength,
        mis_incident,
    )?;
    let departure = upa_response(
        geom.ms1_rows,
        geom.ms1_cols,
        geom.spacing,
        geom.wavelength,
        target_dir,
    )?;
    let values = incident.iter().zip(&departure).map(|(a, b)| a * b).collect();
    Ok(CouplingVector { target, values })
}
