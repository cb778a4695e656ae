//! Closed-form displacement steering: a quadratic phase template on MS1 and
//! its sign-reversed copy on MS2 make the overlapped composite phase a linear
//! ramp whose slope is set by the MS2 displacement.
//!
//! MS1 carries `φ(x, y) = −A(x² + y²) − arg a_MIS` and MS2 carries
//! `θ(x', y') = A(x'² + y'²)`. Shifting MS2 by `(Δx, Δy)` leaves the
//! overlapped elements with `−2A(Δx·x + Δy·y)` plus a constant, which matches
//! the target response when `Δ = (ω/2A)·(sinψ cosϑ, sinψ sinϑ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::echo::{PhaseDesign, Schedule, TargetScene};
use crate::error::{MisError, Result};
use crate::geometry::{upa_response, Direction, MisGeometry};

/// Which lattice offset counts as zero displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeOrigin {
    /// Offset `(0, 0)`: displacements run over `[0, (U−1)d]`.
    #[default]
    Corner,
    /// Central offset (lower of the two for even lattices).
    Center,
}

impl LatticeOrigin {
    pub fn offsets(self, geom: &MisGeometry) -> (usize, usize) {
        match self {
            Self::Corner => (0, 0),
            Self::Center => ((geom.lattice_rows() - 1) / 2, (geom.lattice_cols() - 1) / 2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticTemplate {
    /// Curvature `A` in rad/m².
    pub curvature: f64,
    pub origin: LatticeOrigin,
}

impl QuadraticTemplate {
    pub fn new(curvature: f64, origin: LatticeOrigin) -> Result<Self> {
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(MisError::InvalidInput(format!("curvature must be > 0, got {curvature}")));
        }
        Ok(Self { curvature, origin })
    }

    /// Largest reachable displacement along rows and columns.
    pub fn displacement_bounds(&self, geom: &MisGeometry) -> (f64, f64) {
        let (or, oc) = self.origin.offsets(geom);
        let d = geom.spacing();
        let reach = |u: usize, o: usize| (u - 1 - o).max(o) as f64 * d;
        (reach(geom.lattice_rows(), or), reach(geom.lattice_cols(), oc))
    }
}

/// Coordinates of MS1 element `(r, c)` relative to the aperture center.
fn ms1_coords(geom: &MisGeometry, r: usize, c: usize) -> (f64, f64) {
    let d = geom.spacing();
    (
        (r as f64 - (geom.ms1_rows() - 1) as f64 / 2.0) * d,
        (c as f64 - (geom.ms1_cols() - 1) as f64 / 2.0) * d,
    )
}

/// Template phases for both layers; MS2 coordinates are those of the MS1
/// elements it covers at zero displacement.
pub fn quadratic_phases(geom: &MisGeometry, template: &QuadraticTemplate, mis_incident: Direction) -> Result<PhaseDesign> {
    let a = template.curvature;
    let incident = upa_response(
        geom.ms1_rows(),
        geom.ms1_cols(),
        geom.spacing(),
        geom.wavelength(),
        mis_incident,
    )?;
    let mut phi = Vec::with_capacity(geom.m());
    for r in 0..geom.ms1_rows() {
        for c in 0..geom.ms1_cols() {
            let (x, y) = ms1_coords(geom, r, c);
            let comp = incident[r * geom.ms1_cols() + c].arg();
            phi.push(-a * (x * x + y * y) - comp);
        }
    }
    let (or, oc) = template.origin.offsets(geom);
    let mut theta = Vec::with_capacity(geom.n());
    for r in 0..geom.ms2_rows() {
        for c in 0..geom.ms2_cols() {
            let (x, y) = ms1_coords(geom, r + or, c + oc);
            theta.push(a * (x * x + y * y));
        }
    }
    let wrap = |p: Vec<f64>| -> Vec<Complex64> {
        p.into_iter()
            .map(|v| Complex64::from_polar(1.0, v.rem_euclid(std::f64::consts::TAU)))
            .collect()
    };
    PhaseDesign::new(wrap(phi), wrap(theta))
}

/// `(Δx, Δy) = (ω/2A)·(sinψ cosϑ, sinψ sinϑ)`.
pub fn steering_displacement(curvature: f64, geom: &MisGeometry, target: Direction) -> (f64, f64) {
    let (cx, cy) = target.planar_cosines();
    let g = geom.wavenumber() / (2.0 * curvature);
    (g * cx, g * cy)
}

/// Inverse of [`steering_displacement`].
pub fn recover_angles(curvature: f64, geom: &MisGeometry, dx: f64, dy: f64) -> Result<Direction> {
    let g = 2.0 * curvature / geom.wavenumber();
    let (sx, sy) = (g * dx, g * dy);
    let s = sx.hypot(sy);
    if !(s <= 1.0) {
        return Err(MisError::OutOfCoverage { dx, dy });
    }
    let azimuth = if s == 0.0 { 0.0 } else { sy.atan2(sx) };
    Direction::new(azimuth, s.asin())
}

/// Smallest curvature whose displacement law keeps every target within bounds.
pub fn coverage_curvature(targets: &[Direction], dx_max: f64, dy_max: f64, wavenumber: f64) -> Result<f64> {
    if targets.is_empty() {
        return Err(MisError::EmptyGrid);
    }
    if !(dx_max > 0.0 && dy_max > 0.0) {
        return Err(MisError::InvalidInput("displacement bounds must be positive".into()));
    }
    let (mut fx, mut fy) = (0.0f64, 0.0f64);
    for t in targets {
        let (cx, cy) = t.planar_cosines();
        fx = fx.max(cx.abs());
        fy = fy.max(cy.abs());
    }
    Ok(0.5 * wavenumber * (fx / dx_max).max(fy / dy_max))
}

/// Angular resolution targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolutionSpec {
    /// Lattice step along rows and columns (m).
    pub dx: f64,
    pub dy: f64,
    /// Tolerated azimuth and elevation errors (rad).
    pub azimuth_tol: f64,
    pub elevation_tol: f64,
}

/// Largest curvature that keeps one lattice step within the angular
/// tolerances over the whole grid.
pub fn resolution_curvature(grid: &[Direction], spec: &ResolutionSpec, wavenumber: f64) -> Result<f64> {
    if grid.is_empty() {
        return Err(MisError::EmptyGrid);
    }
    if !(spec.dx > 0.0 && spec.dy > 0.0 && spec.azimuth_tol > 0.0 && spec.elevation_tol > 0.0) {
        return Err(MisError::InvalidInput("steps and tolerances must be positive".into()));
    }
    let mut best = f64::INFINITY;
    let mut found = false;
    for t in grid {
        let (sa, ca) = t.azimuth.sin_cos();
        let (se, ce) = t.elevation.sin_cos();
        let d_az = (sa * spec.dx - ca * spec.dy).abs();
        let d_el = (ca * spec.dx + sa * spec.dy).abs();
        let mut consider = |num: f64, den: f64| {
            if den > 0.0 {
                best = best.min(num / den);
                found = true;
            }
        };
        consider(se * spec.azimuth_tol, d_az);
        consider(ce * spec.elevation_tol, d_el);
    }
    if !found {
        return Err(MisError::NoResolutionBound);
    }
    Ok(0.5 * wavenumber * best)
}

pub fn choose_curvature(a_cov: f64, a_res: f64) -> f64 {
    if a_cov <= a_res {
        a_res
    } else {
        a_cov
    }
}

/// `(π/(λ d))·max{1/(U_r−1), 1/(U_c−1)}`: full-hemisphere coverage from a corner origin.
pub fn fallback_curvature(geom: &MisGeometry) -> Result<f64> {
    let (ur, uc) = (geom.lattice_rows(), geom.lattice_cols());
    if ur < 2 || uc < 2 {
        return Err(MisError::DegenerateLattice(format!(
            "fallback curvature needs at least a 2 x 2 lattice, got {ur} x {uc}"
        )));
    }
    let span = (1.0 / (ur - 1) as f64).max(1.0 / (uc - 1) as f64);
    Ok(std::f64::consts::PI / (geom.wavelength() * geom.spacing()) * span)
}

/// Half-widths `(|Δϑ|, |Δψ|)` of the angular cell swept by one lattice step at `dir`.
pub fn resolution_cell(curvature: f64, geom: &MisGeometry, dir: Direction) -> (f64, f64) {
    let g = 2.0 * curvature / geom.wavenumber();
    let d = geom.spacing();
    let (sa, ca) = dir.azimuth.sin_cos();
    let (se, ce) = dir.elevation.sin_cos();
    (
        g * (sa * d - ca * d).abs() / se,
        g * (ca * d + sa * d).abs() / ce,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringRecord {
    pub target: usize,
    pub dx: f64,
    pub dy: f64,
    pub row_offset: usize,
    pub col_offset: usize,
    pub pattern: usize,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormDesign {
    pub template: QuadraticTemplate,
    pub design: PhaseDesign,
    pub schedule: Schedule,
    pub steering: Vec<SteeringRecord>,
}

/// Rounds to the nearest integer, ties toward the smaller one.
fn round_half_down(x: f64) -> f64 {
    (x - 0.5).ceil()
}

fn quantize(delta: f64, step: f64, origin: usize, count: usize) -> (usize, bool) {
    let raw = origin as f64 + round_half_down(delta / step);
    let hi = (count - 1) as f64;
    let clamped = raw < 0.0 || raw > hi;
    (raw.clamp(0.0, hi) as usize, clamped)
}

/// Builds the template and schedules each target onto the lattice offset
/// nearest its steering displacement. `curvature = None` uses the fallback.
pub fn closed_form_design(
    scene: &TargetScene,
    geom: &MisGeometry,
    curvature: Option<f64>,
    origin: LatticeOrigin,
) -> Result<ClosedFormDesign> {
    let curvature = match curvature {
        Some(a) => a,
        None => fallback_curvature(geom)?,
    };
    let template = QuadraticTemplate::new(curvature, origin)?;
    let design = quadratic_phases(geom, &template, scene.mis_incident())?;
    let (or, oc) = origin.offsets(geom);
    let mut steering = Vec::with_capacity(scene.k());
    for (k, t) in scene.targets().iter().enumerate() {
        let (dx, dy) = steering_displacement(curvature, geom, t.direction);
        let (row_offset, cr) = quantize(dx, geom.spacing(), or, geom.lattice_rows());
        let (col_offset, cc) = quantize(dy, geom.spacing(), oc, geom.lattice_cols());
        steering.push(SteeringRecord {
            target: k,
            dx,
            dy,
            row_offset,
            col_offset,
            pattern: geom.pattern_index(row_offset, col_offset)?,
            clamped: cr || cc,
        });
    }
    let schedule = Schedule::new(steering.iter().map(|s| s.pattern).collect(), geom.u())?;
    Ok(ClosedFormDesign {
        template,
        design,
        schedule,
        steering,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo::{beam_map, angular_grid};
    use approx::assert_relative_eq;

    const LAMBDA: f64 = 0.025;

    fn full_geom() -> MisGeometry {
        MisGeometry::new(20, 20, 16, 16, LAMBDA / 3.0, LAMBDA).unwrap()
    }

    fn deg(az: f64, el: f64) -> Direction {
        Direction::from_degrees(az, el).unwrap()
    }

    #[test]
    fn origin_element_carries_compensation_only() {
        // odd MS1 puts an element at the center
        let g = MisGeometry::new(5, 5, 3, 3, 0.01, LAMBDA).unwrap();
        let t = QuadraticTemplate::new(500.0, LatticeOrigin::Center).unwrap();
        let d = quadratic_phases(&g, &t, Direction::boresight()).unwrap();
        assert_relative_eq!(d.phi_radians()[12], 0.0, epsilon = 1e-12);
        // MS2 center covers MS1 center at zero displacement
        assert_relative_eq!(d.theta_radians()[4], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_elements_share_phase() {
        let g = full_geom();
        let t = QuadraticTemplate::new(1234.0, LatticeOrigin::Corner).unwrap();
        let d = quadratic_phases(&g, &t, Direction::boresight()).unwrap();
        let p = d.phi_radians();
        for r in 0..20 {
            for c in 0..20 {
                assert_relative_eq!(p[r * 20 + c], p[(19 - r) * 20 + (19 - c)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn composite_phase_is_affine() {
        let g = MisGeometry::new(8, 8, 5, 5, LAMBDA / 3.0, LAMBDA).unwrap();
        let t = QuadraticTemplate::new(2000.0, LatticeOrigin::Corner).unwrap();
        let d = quadratic_phases(&g, &t, Direction::boresight()).unwrap();
        for u in 0..g.u() {
            let pat = g.overlap_pattern(u).unwrap();
            // composite phase minus the predicted ramp must be constant
            let (dr, dc) = (pat.row_offset as f64 * g.spacing(), pat.col_offset as f64 * g.spacing());
            let mut residual = Vec::new();
            for (n, &m) in pat.ms1_index.iter().enumerate() {
                let (x, y) = ms1_coords(&g, m / 8, m % 8);
                let v = d.phi[m] * d.theta[n];
                let ramp = Complex64::from_polar(1.0, -2.0 * 2000.0 * (dr * x + dc * y));
                residual.push((v / ramp).arg());
            }
            let r0 = residual[0];
            for r in residual {
                let diff = (r - r0 + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
                assert!(diff.abs() < 1e-9, "pattern {u}: {diff}");
            }
        }
    }

    #[test]
    fn steering_examples() {
        let g = full_geom();
        let w = g.wavenumber();
        assert_eq!(steering_displacement(100.0, &g, Direction::boresight()), (0.0, 0.0));
        let (dx, dy) = steering_displacement(100.0, &g, deg(0.0, 90.0));
        assert_relative_eq!(dx, w / 200.0, max_relative = 1e-12);
        assert!(dy.abs() < 1e-15);
        let (dx, dy) = steering_displacement(w / 0.2, &g, deg(60.0, 30.0));
        assert_relative_eq!(dx, 0.025, max_relative = 1e-12);
        assert_relative_eq!(dy, 0.1 * 0.5 * 60f64.to_radians().sin(), max_relative = 1e-12);
    }

    #[test]
    fn recover_examples() {
        let g = full_geom();
        let a = 3000.0;
        let d = recover_angles(a, &g, 0.0, 0.0).unwrap();
        assert_eq!((d.azimuth, d.elevation), (0.0, 0.0));
        let far = g.wavenumber() / (2.0 * a) * 1.01;
        assert!(matches!(recover_angles(a, &g, far, 0.0), Err(MisError::OutOfCoverage { .. })));
        let t = deg(-120.0, 40.0);
        let (dx, dy) = steering_displacement(a, &g, t);
        let r = recover_angles(a, &g, dx, dy).unwrap();
        assert_relative_eq!(r.azimuth, t.azimuth, epsilon = 1e-12);
        assert_relative_eq!(r.elevation, t.elevation, epsilon = 1e-12);
    }

    #[test]
    fn coverage_examples() {
        let w = std::f64::consts::TAU / LAMBDA;
        let hemi: Vec<Direction> = [0.0, 90.0].iter().map(|&az| deg(az, 90.0)).collect();
        assert_relative_eq!(coverage_curvature(&hemi, 0.1, 0.1, w).unwrap(), w / 0.2, max_relative = 1e-12);
        assert_eq!(coverage_curvature(&[Direction::boresight()], 0.1, 0.1, w).unwrap(), 0.0);
        let cone: Vec<Direction> = (0..=36).map(|i| deg(i as f64 * 10.0, 30.0)).collect();
        let a = coverage_curvature(&cone, 0.1, 0.1, w).unwrap();
        assert!((a - 628.3).abs() < 0.05, "{a}");
        assert!(coverage_curvature(&[], 0.1, 0.1, w).is_err());
    }

    #[test]
    fn resolution_examples() {
        let w = std::f64::consts::TAU / LAMBDA;
        let spec = ResolutionSpec {
            dx: 0.01,
            dy: 1e-300,
            azimuth_tol: 0.02,
            elevation_tol: 0.03,
        };
        let grid = [deg(0.0, 40.0)];
        let a = resolution_curvature(&grid, &spec, w).unwrap();
        let expect = 0.5 * w * 40f64.to_radians().cos() * 0.03 / 0.01;
        assert_relative_eq!(a, expect, max_relative = 1e-9);

        let base = ResolutionSpec { dy: 0.01, ..spec };
        let grid: Vec<Direction> = (1..9).map(|i| deg(i as f64 * 10.0, 20.0 + i as f64 * 5.0)).collect();
        let a1 = resolution_curvature(&grid, &base, w).unwrap();
        let doubled = ResolutionSpec {
            azimuth_tol: 0.04,
            elevation_tol: 0.06,
            ..base
        };
        assert_relative_eq!(resolution_curvature(&grid, &doubled, w).unwrap(), 2.0 * a1, max_relative = 1e-12);
        let halved = ResolutionSpec {
            dx: 0.005,
            dy: 0.005,
            ..base
        };
        assert_relative_eq!(resolution_curvature(&grid, &halved, w).unwrap(), 2.0 * a1, max_relative = 1e-12);

        // boresight: both numerators vanish but denominators do not, so A_res = 0
        assert_eq!(resolution_curvature(&[Direction::boresight()], &base, w).unwrap(), 0.0);
    }

    #[test]
    fn choose_and_fallback() {
        assert_eq!(choose_curvature(1.0, 2.0), 2.0);
        assert_eq!(choose_curvature(3.0, 2.0), 3.0);
        let g = MisGeometry::new(9, 9, 5, 5, LAMBDA / 3.0, LAMBDA).unwrap();
        let a = fallback_curvature(&g).unwrap();
        assert!((a - 3769.9).abs() < 0.05, "{a}");
        let flat = MisGeometry::new(9, 4, 5, 4, LAMBDA / 3.0, LAMBDA).unwrap();
        assert!(matches!(fallback_curvature(&flat), Err(MisError::DegenerateLattice(_))));
    }

    #[test]
    fn quantization_ties_go_down() {
        assert_eq!(quantize(0.5, 1.0, 0, 5), (0, false));
        assert_eq!(quantize(1.5, 1.0, 0, 5), (1, false));
        assert_eq!(quantize(1.51, 1.0, 0, 5), (2, false));
        assert_eq!(quantize(-0.7, 1.0, 0, 5), (0, true));
        assert_eq!(quantize(9.0, 1.0, 2, 5), (4, true));
    }

    fn grid_scene() -> TargetScene {
        let mut dirs = Vec::new();
        for el in [30.0, 50.0, 70.0] {
            for az in [0.0, 45.0, 90.0] {
                dirs.push(deg(az, el));
            }
        }
        TargetScene::from_echo_snr(&dirs, -73.88, 30.0, 1, Direction::boresight()).unwrap()
    }

    #[test]
    fn nine_target_grid_schedules_nine_distinct_patterns() {
        let g = full_geom();
        let cf = closed_form_design(&grid_scene(), &g, None, LatticeOrigin::Corner).unwrap();
        let mut used = cf.schedule.assignment.clone();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used.len(), 9);
        let offsets: Vec<(usize, usize)> = cf.steering.iter().map(|s| (s.row_offset, s.col_offset)).collect();
        assert_eq!(
            offsets,
            vec![(2, 0), (1, 1), (0, 2), (3, 0), (2, 2), (0, 3), (4, 0), (3, 3), (0, 4)]
        );
        assert!(cf.steering.iter().all(|s| !s.clamped));
    }

    #[test]
    fn boresight_target_uses_zero_shift() {
        let g = full_geom();
        let s = TargetScene::from_echo_snr(&[Direction::boresight()], 0.0, 30.0, 1, Direction::boresight()).unwrap();
        let corner = closed_form_design(&s, &g, None, LatticeOrigin::Corner).unwrap();
        assert_eq!(corner.schedule.assignment, vec![0]);
        let center = closed_form_design(&s, &g, None, LatticeOrigin::Center).unwrap();
        assert_eq!(center.schedule.assignment, vec![g.pattern_index(2, 2).unwrap()]);
    }

    #[test]
    fn mirrored_azimuths_pick_mirrored_columns() {
        let g = full_geom();
        let a = 0.5 * fallback_curvature(&g).unwrap();
        let s = TargetScene::from_echo_snr(&[deg(40.0, 35.0), deg(-40.0, 35.0)], 0.0, 30.0, 1, Direction::boresight())
            .unwrap();
        let cf = closed_form_design(&s, &g, Some(a), LatticeOrigin::Center).unwrap();
        let (p, n) = (&cf.steering[0], &cf.steering[1]);
        assert_relative_eq!(p.dy, -n.dy, max_relative = 1e-12);
        assert_eq!(p.row_offset, n.row_offset);
        assert_eq!(p.col_offset - 2, 2 - n.col_offset);
    }

    #[test]
    fn scheduled_beams_point_at_their_targets() {
        let g = full_geom();
        let scene = grid_scene();
        let cf = closed_form_design(&scene, &g, None, LatticeOrigin::Corner).unwrap();
        let grid = angular_grid((-90.0, 90.0), 361, (0.0, 90.0), 181).unwrap();
        for (k, t) in scene.targets().iter().enumerate() {
            let map = beam_map(&cf.design, cf.schedule.pattern(k), &g, Direction::boresight(), &grid).unwrap();
            let peak = map.iter().max_by(|a, b| a.gain_db.total_cmp(&b.gain_db)).unwrap();
            let (da, de) = resolution_cell(cf.template.curvature, &g, t.direction);
            let err_az = (peak.direction.azimuth - t.direction.azimuth).abs();
            let err_el = (peak.direction.elevation - t.direction.elevation).abs();
            assert!(err_el <= de + 1e-9, "target {k}: elevation error {err_el} > {de}");
            assert!(err_az <= da + 1e-9 || peak.direction.elevation < 1e-9, "target {k}: azimuth error {err_az} > {da}");
        }
    }
}
