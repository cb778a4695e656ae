//! Serialized outputs. Targets and patterns are one-based in every file.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mis_core::closed_form::{ClosedFormDesign, LatticeOrigin};
use mis_core::echo::EchoModel;
use mis_core::ralm::OuterRecord;
use mis_core::units::linear_to_db;
use mis_core::{PhaseDesign, RalmReport, Schedule, TargetScene};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetRecord {
    pub k: usize,
    pub u: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrRecord {
    pub k: usize,
    pub u: usize,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RalmDetails {
    pub eta_final_db: f64,
    pub converged: bool,
    pub ill_conditioned: bool,
    pub best_restart: usize,
    pub restart_min_sinr_db: Vec<f64>,
    /// Relaxed schedule, one row per target.
    pub xi: Vec<Vec<f64>>,
    pub trace: Vec<OuterRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringExport {
    pub k: usize,
    pub dx_m: f64,
    pub dy_m: f64,
    pub row_offset: usize,
    pub col_offset: usize,
    pub u: usize,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormDetails {
    pub curvature_rad_per_m2: f64,
    pub origin: LatticeOrigin,
    pub steering: Vec<SteeringExport>,
}

/// One method's result on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub config_hash: String,
    pub method: &'static str,
    pub seed: u64,
    pub min_sinr_db: f64,
    pub targets: Vec<TargetRecord>,
    pub design: PhaseDesign,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ralm: Option<RalmDetails>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedFormDetails>,
    #[serde(skip)]
    pub schedule: Schedule,
    #[serde(skip)]
    pub wall_time_s: f64,
}

fn target_records(model: &EchoModel, scene: &TargetScene, design: &PhaseDesign, schedule: &Schedule) -> Result<Vec<TargetRecord>> {
    let sinrs = model.scheduled_sinrs(design, schedule)?;
    Ok(scene
        .targets()
        .iter()
        .zip(&sinrs)
        .enumerate()
        .map(|(k, (t, &s))| TargetRecord {
            k: k + 1,
            u: schedule.pattern(k) + 1,
            azimuth_deg: t.direction.azimuth_deg(),
            elevation_deg: t.direction.elevation_deg(),
            sinr_db: linear_to_db(s),
        })
        .collect())
}

fn min_db(targets: &[TargetRecord]) -> f64 {
    targets.iter().map(|t| t.sinr_db).fold(f64::INFINITY, f64::min)
}

impl MethodReport {
    pub fn from_ralm(hash: &str, seed: u64, model: &EchoModel, r: RalmReport) -> Result<Self> {
        let targets = target_records(model, model.scene(), &r.design, &r.schedule)?;
        let u = model.u();
        Ok(Self {
            config_hash: hash.to_string(),
            method: "ralm",
            seed,
            min_sinr_db: min_db(&targets),
            targets,
            ralm: Some(RalmDetails {
                eta_final_db: linear_to_db(r.eta_final),
                converged: r.converged,
                ill_conditioned: r.ill_conditioned,
                best_restart: r.restart,
                restart_min_sinr_db: r.restart_min_sinr_db,
                xi: r.xi.chunks(u).map(|row| row.to_vec()).collect(),
                trace: r.trace,
            }),
            closed_form: None,
            design: r.design,
            schedule: r.schedule,
            wall_time_s: r.wall_time_s,
        })
    }

    pub fn from_closed_form(hash: &str, seed: u64, model: &EchoModel, cf: ClosedFormDesign, wall_time_s: f64) -> Result<Self> {
        let targets = target_records(model, model.scene(), &cf.design, &cf.schedule)?;
        Ok(Self {
            config_hash: hash.to_string(),
            method: "closed-form",
            seed,
            min_sinr_db: min_db(&targets),
            targets,
            ralm: None,
            closed_form: Some(ClosedFormDetails {
                curvature_rad_per_m2: cf.template.curvature,
                origin: cf.template.origin,
                steering: cf
                    .steering
                    .iter()
                    .map(|s| SteeringExport {
                        k: s.target + 1,
                        dx_m: s.dx,
                        dy_m: s.dy,
                        row_offset: s.row_offset,
                        col_offset: s.col_offset,
                        u: s.pattern + 1,
                        clamped: s.clamped,
                    })
                    .collect(),
            }),
            design: cf.design,
            schedule: cf.schedule,
            wall_time_s,
        })
    }

    /// File-name stem: `ralm` or `closed_form`.
    pub fn stem(&self) -> &'static str {
        if self.method == "ralm" {
            "ralm"
        } else {
            "closed_form"
        }
    }
}

pub fn sinr_table(model: &EchoModel, design: &PhaseDesign) -> Result<Vec<SinrRecord>> {
    let table = model.sinr_table(design)?;
    Ok(table
        .iter()
        .enumerate()
        .flat_map(|(k, row)| {
            row.iter().enumerate().map(move |(u, &s)| SinrRecord {
                k: k + 1,
                u: u + 1,
                sinr_db: linear_to_db(s),
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaSummary {
    pub config_hash: String,
    pub ralm_min_sinr_db: f64,
    pub closed_form_min_sinr_db: f64,
    pub delta_db: f64,
    pub per_target_delta_db: Vec<f64>,
}

impl DeltaSummary {
    pub fn new(ralm: &MethodReport, cf: &MethodReport) -> Self {
        Self {
            config_hash: ralm.config_hash.clone(),
            ralm_min_sinr_db: ralm.min_sinr_db,
            closed_form_min_sinr_db: cf.min_sinr_db,
            delta_db: ralm.min_sinr_db - cf.min_sinr_db,
            per_target_delta_db: ralm
                .targets
                .iter()
                .zip(&cf.targets)
                .map(|(a, b)| a.sinr_db - b.sinr_db)
                .collect(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends one line per timed step; kept apart from the reports so those stay reproducible.
pub fn append_timing(dir: &Path, label: &str, seconds: f64) -> Result<()> {
    use std::io::Write;
    let path = dir.join("timings.log");
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    writeln!(f, "{label}\t{seconds:.3}")?;
    Ok(())
}
