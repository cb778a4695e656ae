//! Exhaustive max-min search over quantized phases for tiny instances.

use num_complex::Complex64;
use serde::Serialize;

use crate::echo::{EchoModel, PhaseDesign, Schedule, TargetScene};
use crate::error::{MisError, Result};
use crate::geometry::MisGeometry;

pub const ORACLE_MAX_M: usize = 4;
pub const ORACLE_MAX_LEVELS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub levels: usize,
    /// `max over phases of min_k max_u SINR` (linear).
    pub value: f64,
    pub design: PhaseDesign,
    pub schedule: Schedule,
    pub evaluated: u64,
}

/// Every design with phases in `{2πq/Q}` on both layers, each scored under
/// its best schedule. Refuses anything beyond `M ≤ 4`, `N = 1`, `Q ≤ 16`.
pub fn exhaustive_max_min(scene: &TargetScene, geom: &MisGeometry, levels: usize) -> Result<OracleResult> {
    if geom.m() > ORACLE_MAX_M || geom.n() != 1 || levels == 0 || levels > ORACLE_MAX_LEVELS {
        return Err(MisError::OracleRefused(format!(
            "M = {}, N = {}, Q = {levels}; need M <= {ORACLE_MAX_M}, N = 1, 1 <= Q <= {ORACLE_MAX_LEVELS}",
            geom.m(),
            geom.n()
        )));
    }
    let model = EchoModel::new(scene, geom)?;
    let alphabet: Vec<Complex64> = (0..levels)
        .map(|q| Complex64::from_polar(1.0, std::f64::consts::TAU * q as f64 / levels as f64))
        .collect();
    let slots = geom.m() + geom.n();
    let total = (levels as u64).pow(slots as u32);
    let mut digits = vec![0usize; slots];
    let mut phi = vec![alphabet[0]; geom.m()];
    let mut theta = vec![alphabet[0]; geom.n()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..total {
        for (i, &d) in digits.iter().enumerate() {
            if i < phi.len() {
                phi[i] = alphabet[d];
            } else {
                theta[i - phi.len()] = alphabet[d];
            }
        }
        let table = model.responses(&phi, &theta);
        let value = (0..model.k())
            .map(|k| {
                (0..model.u())
                    .map(|u| model.sinr_from_table(&table, k, u))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, digits.clone()));
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < levels {
                break;
            }
            *d = 0;
        }
    }
    let (value, digits) = best.expect("at least one design");
    let design = PhaseDesign {
        phi: digits[..geom.m()].iter().map(|&d| alphabet[d]).collect(),
        theta: digits[geom.m()..].iter().map(|&d| alphabet[d]).collect(),
    };
    let schedule = model.best_schedule(&design)?;
    Ok(OracleResult {
        levels,
        value,
        design,
        schedule,
        evaluated: total,
    })
}
