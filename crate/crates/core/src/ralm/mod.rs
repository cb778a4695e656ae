//! Riemannian augmented Lagrangian solver for the joint phase/schedule design.

mod gradcheck;
mod lagrangian;
mod rcg;

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{closed_form_design, LatticeOrigin};
use crate::echo::{EchoModel, PhaseDesign, Schedule, TargetScene};
use crate::error::{check_len, MisError, Result};
use crate::geometry::MisGeometry;
use crate::manifold::ProductPoint;
use crate::units::linear_to_db;

pub use gradcheck::{gradient_check, random_active_point, GradCheck};
pub use lagrangian::{aug_lagrangian, constraint_value, euclid_grad, Evaluation, Objective};
pub use rcg::{rcg_solve, RcgOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RalmConfig {
    pub rho0: f64,
    pub rho_growth: f64,
    pub violation_shrink: f64,
    pub tol_shrink: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub eps_rcg0: f64,
    pub eps_min: f64,
    pub zeta_min: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub max_linesearch: usize,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Seed restart 0 with the closed-form template.
    pub warm_start: bool,
}

impl Default for RalmConfig {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            rho_growth: 2.0,
            violation_shrink: 0.8,
            tol_shrink: 0.9,
            lambda_min: 0.0,
            lambda_max: 100.0,
            eps_rcg0: 1e-2,
            eps_min: 1e-6,
            zeta_min: 1e-6,
            max_outer: 50,
            max_inner: 500,
            max_linesearch: 30,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            seed: 0,
            restarts: 5,
            warm_start: true,
        }
    }
}

impl RalmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(MisError::InvalidInput(format!("solver config: {msg}")));
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad("rho0 must be > 0");
        }
        if !(self.rho_growth > 1.0) {
            return bad("rho_growth must exceed 1");
        }
        if !(self.violation_shrink > 0.0 && self.violation_shrink < 1.0) {
            return bad("violation_shrink must lie in (0, 1)");
        }
        if !(self.tol_shrink > 0.0 && self.tol_shrink < 1.0) {
            return bad("tol_shrink must lie in (0, 1)");
        }
        if !(self.lambda_min <= self.lambda_max) || !self.lambda_min.is_finite() || !self.lambda_max.is_finite() {
            return bad("lambda_min must not exceed lambda_max");
        }
        if !(self.eps_min > 0.0 && self.eps_min <= self.eps_rcg0) {
            return bad("need 0 < eps_min <= eps_rcg0");
        }
        if !(self.zeta_min >= 0.0) {
            return bad("zeta_min must be >= 0");
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return bad("armijo_c1 must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if self.max_linesearch == 0 || self.restarts == 0 {
            return bad("max_linesearch and restarts must be >= 1");
        }
        Ok(())
    }
}

/// Outer-loop state.
#[derive(Debug, Clone)]
pub struct RalmState {
    pub z: ProductPoint,
    pub lambda: Vec<f64>,
    pub rho: f64,
    pub iota: Vec<f64>,
    pub eps_rcg: f64,
    pub outer: usize,
}

/// `λ_k ← clip(λ_k + ρ q_k)` and `ι_k ← max{q_k, −λ_k/ρ}` with the old `λ`.
pub fn multiplier_update(lambda: &[f64], rho: f64, q: &[f64], cfg: &RalmConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("q", lambda.len(), q.len())?;
    let iota = lambda.iter().zip(q).map(|(l, q)| q.max(-l / rho)).collect();
    let lambda = lambda
        .iter()
        .zip(q)
        .map(|(l, q)| (l + rho * q).clamp(cfg.lambda_min, cfg.lambda_max))
        .collect();
    Ok((lambda, iota))
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Keeps `ρ` when the violation measure shrank enough (or on the first
/// outer iteration, `iota_old = None`), otherwise grows it.
pub fn penalty_update(rho: f64, iota_new: &[f64], iota_old: Option<&[f64]>, cfg: &RalmConfig) -> f64 {
    match iota_old {
        None => rho,
        Some(old) if max_abs(iota_new) <= cfg.violation_shrink * max_abs(old) => rho,
        Some(_) => rho * cfg.rho_growth,
    }
}

/// Final binary schedule: per-target SINR argmax under the converged phases.
/// `xi` is accepted for diagnostics only.
pub fn round_schedule(xi: &[f64], design: &PhaseDesign, model: &EchoModel) -> Result<Schedule> {
    check_len("xi", model.k() * model.u(), xi.len())?;
    model.best_schedule(design)
}

/// Rounds each row of `xi` to its largest entry (ties to the smallest index).
pub fn xi_argmax_schedule(xi: &[f64], u: usize) -> Schedule {
    let assignment = xi
        .chunks(u)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &x)| if x > best.1 { (j, x) } else { best })
                .0
        })
        .collect();
    Schedule { assignment }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterRecord {
    pub iteration: usize,
    pub max_violation: f64,
    pub rho: f64,
    pub eta: f64,
    pub inner_iterations: usize,
    pub inner_stalled: bool,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrEntry {
    pub k: usize,
    pub u: usize,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RalmReport {
    pub design: PhaseDesign,
    pub schedule: Schedule,
    /// Final slack in linear SINR units.
    pub eta_final: f64,
    pub sinr_db: Vec<f64>,
    pub min_sinr_db: f64,
    /// Full SINR table, one entry per (target, pattern).
    pub sinr_table: Vec<SinrEntry>,
    /// Relaxed schedule, `K × U` row-major.
    pub xi: Vec<f64>,
    pub trace: Vec<OuterRecord>,
    pub converged: bool,
    pub ill_conditioned: bool,
    pub restart: usize,
    pub restart_min_sinr_db: Vec<f64>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// True when two targets have (numerically) collinear coupling vectors.
pub fn ill_conditioned(model: &EchoModel) -> bool {
    let c = model.couplings();
    let m = model.geometry().m() as f64;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let dot: Complex64 = c[i].values.iter().zip(&c[j].values).map(|(a, b)| a.conj() * b).sum();
            if dot.norm() / m > 1.0 - 1e-9 {
                return true;
            }
        }
    }
    false
}

fn distance(a: &ProductPoint, b: &ProductPoint) -> f64 {
    let c: f64 = a
        .phi
        .iter()
        .zip(&b.phi)
        .chain(a.theta.iter().zip(&b.theta))
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let x: f64 = a.xi.iter().zip(&b.xi).map(|(p, q)| (p - q).powi(2)).sum();
    ((a.eta - b.eta).powi(2) + c + x).sqrt()
}

struct RunResult {
    z: ProductPoint,
    scale: f64,
    trace: Vec<OuterRecord>,
    converged: bool,
}

/// Unit-modulus phases drawn uniformly on `[0, 2π)`.
pub fn random_design(geom: &MisGeometry, rng: &mut ChaCha8Rng) -> PhaseDesign {
    let mut unit = |n: usize| -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
            .collect()
    };
    let phi = unit(geom.m());
    let theta = unit(geom.n());
    PhaseDesign { phi, theta }
}

/// Starting design of restart `r`: the closed-form template for `r = 0`
/// when warm starts are enabled and the lattice allows one, random otherwise.
pub fn starting_design(scene: &TargetScene, geom: &MisGeometry, cfg: &RalmConfig, r: usize) -> Result<PhaseDesign> {
    if cfg.warm_start && r == 0 && geom.lattice_rows() >= 2 && geom.lattice_cols() >= 2 {
        return Ok(closed_form_design(scene, geom, None, LatticeOrigin::Corner)?.design);
    }
    Ok(random_design(geom, &mut restart_rng(cfg.seed, r)))
}

/// Objective scaled so that the starting slack equals [`INITIAL_SLACK`],
/// together with the starting point (uniform `Ξ`, `η` at the max-min value).
pub fn scaled_start(model: &EchoModel, design: PhaseDesign) -> Result<(Objective, ProductPoint)> {
    let raw = model.max_min_sinr(&design)?;
    let scale = if raw > 0.0 && raw.is_finite() {
        raw / INITIAL_SLACK
    } else {
        Objective::normalized(model.clone()).scale()
    };
    let z = ProductPoint::new(raw / scale, design.phi, design.theta, model.k(), model.u())?;
    Ok((Objective::with_scale(model.clone(), scale), z))
}

/// Normalized slack at the start of every restart.
pub const INITIAL_SLACK: f64 = 0.1;

fn run_outer(obj: &Objective, z0: ProductPoint, cfg: &RalmConfig) -> Result<RunResult> {
    let k = obj.model().k();
    let mut state = RalmState {
        z: z0,
        lambda: vec![(1.0 / k as f64).clamp(cfg.lambda_min, cfg.lambda_max); k],
        rho: cfg.rho0,
        iota: vec![],
        eps_rcg: cfg.eps_rcg0,
        outer: 0,
    };
    let mut trace = Vec::new();
    let mut converged = false;
    while state.outer < cfg.max_outer {
        let inner = rcg_solve(obj, &state.z, &state.lambda, state.rho, state.eps_rcg, cfg)?;
        let q = obj.evaluate(&inner.point)?.q;
        let (lambda, iota) = multiplier_update(&state.lambda, state.rho, &q, cfg)?;
        let old = (state.outer > 0).then_some(state.iota.as_slice());
        let rho = penalty_update(state.rho, &iota, old, cfg);
        let step = distance(&state.z, &inner.point);
        trace.push(OuterRecord {
            iteration: state.outer,
            max_violation: q.iter().copied().fold(0.0, f64::max) * obj.scale(),
            rho: state.rho,
            eta: inner.point.eta * obj.scale(),
            inner_iterations: inner.iterations,
            inner_stalled: inner.stalled,
            step,
        });
        state.z = inner.point;
        state.lambda = lambda;
        state.iota = iota;
        state.rho = rho;
        state.eps_rcg = (cfg.tol_shrink * state.eps_rcg).max(cfg.eps_min);
        state.outer += 1;
        if step < cfg.zeta_min && state.eps_rcg <= cfg.eps_min {
            converged = true;
            break;
        }
    }
    Ok(RunResult {
        z: state.z,
        scale: obj.scale(),
        trace,
        converged,
    })
}

/// Restart seeds are independent ChaCha streams of the configured seed.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

pub fn ralm_solve(scene: &TargetScene, geom: &MisGeometry, cfg: &RalmConfig) -> Result<RalmReport> {
    cfg.validate()?;
    let started = Instant::now();
    let model = EchoModel::new(scene, geom)?;

    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let (obj, z0) = scaled_start(&model, starting_design(scene, geom, cfg, r)?)?;
            let run = run_outer(&obj, z0, cfg)?;
            let design = PhaseDesign::new(run.z.phi.clone(), run.z.theta.clone())?;
            let value = model.max_min_sinr(&design)?;
            Ok((run, design, value))
        })
        .collect::<Result<Vec<_>>>()?;

    let restart_min_sinr_db: Vec<f64> = runs.iter().map(|r| linear_to_db(r.2)).collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.2 > runs[best].2 {
            best = i;
        }
    }
    let (run, design, _) = runs.into_iter().nth(best).expect("at least one restart");
    let schedule = round_schedule(&run.z.xi, &design, &model)?;
    let sinrs = model.scheduled_sinrs(&design, &schedule)?;
    let table = model.sinr_table(&design)?;
    let sinr_table = table
        .iter()
        .enumerate()
        .flat_map(|(k, row)| {
            row.iter().enumerate().map(move |(u, &s)| SinrEntry {
                k,
                u,
                sinr_db: linear_to_db(s),
            })
        })
        .collect();
    let sinr_db: Vec<f64> = sinrs.iter().map(|&s| linear_to_db(s)).collect();
    Ok(RalmReport {
        min_sinr_db: sinr_db.iter().copied().fold(f64::INFINITY, f64::min),
        sinr_db,
        eta_final: run.z.eta * run.scale,
        sinr_table,
        xi: run.z.xi.clone(),
        trace: run.trace,
        converged: run.converged,
        ill_conditioned: ill_conditioned(&model),
        restart: best,
        restart_min_sinr_db,
        design,
        schedule,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
