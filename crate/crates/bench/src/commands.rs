//! Subcommand implementations. Each reads an already validated config and
//! writes its outputs under one directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mis_core::closed_form::closed_form_design;
use mis_core::echo::{beam_map, EchoModel};
use mis_core::oracle::exhaustive_max_min;
use mis_core::ralm::{gradient_check, random_active_point, restart_rng, GradCheck, Objective};
use mis_core::units::linear_to_db;
use mis_core::{ralm_solve, PhaseDesign, Schedule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Method, ScenarioConfig, SweepSpec, SweepVariable};
use crate::report::{
    append_timing, sinr_table, write_csv, write_json, DeltaSummary, MethodReport, TargetRecord,
};

/// Command-line overrides shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub method: Option<Method>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(ConfigError("--workers must be >= 1".into()).into());
            }
            cfg.run.workers = w;
        }
        if let Some(m) = self.method {
            cfg.run.method = m;
        }
        Ok(())
    }

    pub fn output_dir(&self, cfg: &ScenarioConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.run.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    Ok(pool.install(f))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Runs the configured method(s) without touching the filesystem.
pub fn solve(cfg: &ScenarioConfig) -> Result<Vec<MethodReport>> {
    let geom = cfg.geometry_model()?;
    let scene = cfg.scene_model()?;
    let model = EchoModel::new(&scene, &geom)?;
    let hash = cfg.hash();
    let seed = cfg.run.seed;
    let mut out = Vec::new();
    if cfg.run.method.runs_ralm() {
        let report = ralm_solve(&scene, &geom, &cfg.solver_config())?;
        out.push(MethodReport::from_ralm(&hash, seed, &model, report)?);
    }
    if cfg.run.method.runs_closed_form() {
        let started = Instant::now();
        let cf = closed_form_design(&scene, &geom, cfg.closed_form.curvature_rad_per_m2, cfg.closed_form.origin)?;
        let elapsed = started.elapsed().as_secs_f64();
        out.push(MethodReport::from_closed_form(&hash, seed, &model, cf, elapsed)?);
    }
    Ok(out)
}

pub fn run(cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<MethodReport>> {
    let reports = with_workers(cfg.run.workers, || solve(cfg))??;
    create_dir(dir)?;
    let model = EchoModel::new(&cfg.scene_model()?, &cfg.geometry_model()?)?;
    for r in &reports {
        let stem = r.stem();
        write_json(&dir.join(format!("{stem}_report.json")), r)?;
        write_csv(&dir.join(format!("{stem}_sinr.csv")), &r.targets)?;
        write_json(&dir.join(format!("{stem}_sinr_table.json")), &sinr_table(&model, &r.design)?)?;
        append_timing(dir, stem, r.wall_time_s)?;
    }
    if let [ralm, cf] = reports.as_slice() {
        write_json(&dir.join("delta_summary.json"), &DeltaSummary::new(ralm, cf))?;
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub swept_value: f64,
    pub min_sinr_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub ralm: Vec<SweepRow>,
    pub closed_form: Vec<SweepRow>,
}

fn best_rows(results: &[(f64, u64, f64)]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = Vec::new();
    for &(value, seed, db) in results {
        match rows.iter_mut().find(|r| r.swept_value == value) {
            Some(r) if db > r.min_sinr_db || (db == r.min_sinr_db && seed < r.seed) => {
                r.min_sinr_db = db;
                r.seed = seed;
            }
            Some(_) => {}
            None => rows.push(SweepRow {
                swept_value: value,
                min_sinr_db: db,
                seed,
            }),
        }
    }
    rows.sort_by(|a, b| a.swept_value.total_cmp(&b.swept_value));
    rows
}

/// One job per (value, seed); each method keeps its best seed per value.
pub fn sweep(spec: &SweepSpec, dir: &Path) -> Result<SweepResult> {
    let base = &spec.base;
    let seeds = spec.seeds();
    let mut values = spec.sweep.values.clone();
    values.sort_by(f64::total_cmp);
    let jobs: Vec<(f64, u64)> = values
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let variable: SweepVariable = spec.sweep.variable;
    let outcomes: Vec<(f64, u64, Result<Vec<MethodReport>>)> = with_workers(base.run.workers, || {
        jobs.par_iter()
            .map(|&(value, seed)| {
                let result = base.with_sweep_value(variable, value).and_then(|mut cfg| {
                    cfg.run.seed = seed;
                    solve(&cfg)
                });
                (value, seed, result)
            })
            .collect()
    })?;

    create_dir(dir)?;
    let partial = dir.join("PARTIAL");
    if partial.exists() {
        fs::remove_file(&partial)?;
    }
    let mut ralm = Vec::new();
    let mut cf = Vec::new();
    let mut failures = Vec::new();
    let mut failed_values = BTreeSet::new();
    for (value, seed, result) in &outcomes {
        match result {
            Ok(reports) => {
                for r in reports {
                    append_timing(dir, &format!("{}\t{value}\t{seed}", r.stem()), r.wall_time_s)?;
                    let entry = (*value, *seed, r.min_sinr_db);
                    if r.method == "ralm" {
                        ralm.push(entry);
                    } else {
                        cf.push(entry);
                    }
                }
            }
            Err(e) => {
                failures.push(format!("value {value}, seed {seed}: {e:#}"));
                failed_values.insert(value.to_bits());
            }
        }
    }
    let keep = |rows: Vec<(f64, u64, f64)>| -> Vec<SweepRow> {
        best_rows(
            &rows
                .into_iter()
                .filter(|(v, _, _)| !failed_values.contains(&v.to_bits()))
                .collect::<Vec<_>>(),
        )
    };
    let result = SweepResult {
        ralm: keep(ralm),
        closed_form: keep(cf),
    };
    if base.run.method.runs_ralm() {
        write_csv(&dir.join("sweep_ralm.csv"), &result.ralm)?;
    }
    if base.run.method.runs_closed_form() {
        write_csv(&dir.join("sweep_closed_form.csv"), &result.closed_form)?;
    }
    if !failures.is_empty() {
        fs::write(&partial, failures.join("\n") + "\n")?;
        bail!("sweep aborted: {}", failures.join("; "));
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamSampleRow {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamAnnotation {
    pub method: String,
    pub targets: Vec<TargetRecord>,
    pub peaks: Vec<BeamPeak>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamPeak {
    pub u: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

/// Design read back from a prior `*_report.json`.
#[derive(Debug, Clone, Deserialize)]
struct StoredReport {
    method: String,
    design: PhaseDesign,
    targets: Vec<StoredTarget>,
}

#[derive(Debug, Clone, Deserialize)]
struct StoredTarget {
    u: usize,
}

fn load_design(path: &Path, m: usize, n: usize, u_count: usize) -> Result<(String, PhaseDesign, Schedule)> {
    let bad = |msg: String| -> anyhow::Error { ConfigError(format!("design file {}: {msg}", path.display())).into() };
    let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let stored: StoredReport = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if stored.design.phi.len() != m || stored.design.theta.len() != n {
        return Err(bad(format!(
            "design has {} + {} elements, scenario needs {m} + {n}",
            stored.design.phi.len(),
            stored.design.theta.len()
        )));
    }
    let assignment = stored
        .targets
        .iter()
        .map(|t| t.u.checked_sub(1).ok_or_else(|| bad("pattern indices are one-based".into())))
        .collect::<Result<Vec<_>>>()?;
    let schedule = Schedule::new(assignment, u_count).map_err(|e| bad(e.to_string()))?;
    Ok((stored.method, stored.design, schedule))
}

/// Writes one normalized gain grid per requested pattern (all scheduled
/// patterns by default) and an annotation file per method.
pub fn beam_map_cmd(cfg: &ScenarioConfig, dir: &Path, design_file: Option<&Path>, pattern: Option<usize>) -> Result<Vec<PathBuf>> {
    let geom = cfg.geometry_model()?;
    let scene = cfg.scene_model()?;
    let model = EchoModel::new(&scene, &geom)?;
    let grid = cfg.beam_grid()?;
    if let Some(u) = pattern {
        if u == 0 || u > geom.u() {
            return Err(ConfigError(format!("--pattern {u} outside 1..={}", geom.u())).into());
        }
    }
    let sources: Vec<(String, PhaseDesign, Schedule)> = match design_file {
        Some(path) => {
            let loaded = load_design(path, geom.m(), geom.n(), geom.u())?;
            if loaded.2.assignment.len() != scene.k() {
                return Err(ConfigError(format!(
                    "design file {} schedules {} targets, scenario has {}",
                    path.display(),
                    loaded.2.assignment.len(),
                    scene.k()
                ))
                .into());
            }
            vec![loaded]
        }
        None => with_workers(cfg.run.workers, || solve(cfg))??
            .into_iter()
            .map(|r| (r.method.to_string(), r.design, r.schedule))
            .collect(),
    };
    create_dir(dir)?;
    let mut written = Vec::new();
    for (method, design, schedule) in sources {
        let stem = method.replace('-', "_");
        let patterns: Vec<usize> = match pattern {
            Some(u) => vec![u - 1],
            None => schedule.assignment.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
        };
        let mut peaks = Vec::new();
        for u in patterns {
            let map = with_workers(cfg.run.workers, || beam_map(&design, u, &geom, scene.mis_incident(), &grid))??;
            let rows: Vec<BeamSampleRow> = map
                .iter()
                .map(|s| BeamSampleRow {
                    azimuth_deg: s.direction.azimuth_deg(),
                    elevation_deg: s.direction.elevation_deg(),
                    gain_db: s.gain_db,
                })
                .collect();
            let peak = map
                .iter()
                .rev()
                .max_by(|a, b| a.gain_db.total_cmp(&b.gain_db))
                .expect("grid is non-empty");
            peaks.push(BeamPeak {
                u: u + 1,
                azimuth_deg: peak.direction.azimuth_deg(),
                elevation_deg: peak.direction.elevation_deg(),
            });
            let path = dir.join(format!("beam_map_{stem}_u{}.csv", u + 1));
            write_csv(&path, &rows)?;
            written.push(path);
        }
        let sinrs = model.scheduled_sinrs(&design, &schedule)?;
        let targets = scene
            .targets()
            .iter()
            .enumerate()
            .map(|(k, t)| TargetRecord {
                k: k + 1,
                u: schedule.pattern(k) + 1,
                azimuth_deg: t.direction.azimuth_deg(),
                elevation_deg: t.direction.elevation_deg(),
                sinr_db: linear_to_db(sinrs[k]),
            })
            .collect();
        let path = dir.join(format!("beam_map_{stem}_annotation.json"));
        write_json(&path, &BeamAnnotation { method, targets, peaks })?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradPoint {
    pub index: usize,
    pub active: bool,
    pub errors: GradCheck,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub config_hash: String,
    pub step: f64,
    pub tolerance: f64,
    pub max_relative_error: f64,
    pub pass: bool,
    pub points: Vec<GradPoint>,
}

/// Finite differences of the normalized augmented Lagrangian on random
/// active points plus one point on the inactive branch.
pub fn gradcheck_report(cfg: &ScenarioConfig) -> Result<GradcheckReport> {
    let geom = cfg.geometry_model()?;
    let scene = cfg.scene_model()?;
    let obj = Objective::normalized(EchoModel::new(&scene, &geom)?);
    let g = &cfg.gradcheck;
    let mut rng = restart_rng(cfg.run.seed, 0);
    let mut points = Vec::with_capacity(g.points + 1);
    for index in 0..g.points {
        let (z, lambda, rho) = random_active_point(&obj, &mut rng)?;
        let errors = gradient_check(&obj, &z, &lambda, rho, g.step)?;
        points.push(GradPoint {
            index,
            active: true,
            max: errors.max(),
            errors,
        });
    }
    let (mut z, _, rho) = random_active_point(&obj, &mut rng)?;
    z.eta = 0.0;
    let errors = gradient_check(&obj, &z, &vec![0.0; scene.k()], rho, g.step)?;
    points.push(GradPoint {
        index: g.points,
        active: false,
        max: errors.max(),
        errors,
    });
    let max = points.iter().map(|p| p.max).fold(0.0, f64::max);
    Ok(GradcheckReport {
        config_hash: cfg.hash(),
        step: g.step,
        tolerance: g.tolerance,
        max_relative_error: max,
        pass: max < g.tolerance,
        points,
    })
}

pub fn gradcheck(cfg: &ScenarioConfig, dir: &Path) -> Result<GradcheckReport> {
    let report = gradcheck_report(cfg)?;
    create_dir(dir)?;
    write_json(&dir.join("gradcheck.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub config_hash: String,
    pub levels: usize,
    pub evaluated: u64,
    pub oracle_min_sinr_db: f64,
    pub oracle_design: PhaseDesign,
    pub ralm_min_sinr_db: f64,
    /// Solver minus oracle.
    pub gap_db: f64,
    pub allowed_gap_db: f64,
    pub pass: bool,
}

pub fn oracle_report(cfg: &ScenarioConfig) -> Result<OracleReport> {
    let geom = cfg.geometry_model()?;
    let scene = cfg.scene_model()?;
    let oracle = exhaustive_max_min(&scene, &geom, cfg.oracle.levels)?;
    let ralm = with_workers(cfg.run.workers, || ralm_solve(&scene, &geom, &cfg.solver_config()))??;
    let oracle_db = linear_to_db(oracle.value);
    let gap = ralm.min_sinr_db - oracle_db;
    Ok(OracleReport {
        config_hash: cfg.hash(),
        levels: oracle.levels,
        evaluated: oracle.evaluated,
        oracle_min_sinr_db: oracle_db,
        oracle_design: oracle.design,
        ralm_min_sinr_db: ralm.min_sinr_db,
        gap_db: gap,
        allowed_gap_db: cfg.oracle.gap_db,
        pass: gap >= -cfg.oracle.gap_db,
    })
}

pub fn oracle(cfg: &ScenarioConfig, dir: &Path) -> Result<OracleReport> {
    let report = oracle_report(cfg)?;
    create_dir(dir)?;
    write_json(&dir.join("oracle_report.json"), &report)?;
    Ok(report)
}
