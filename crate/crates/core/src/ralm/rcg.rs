//! Riemannian conjugate gradient on the augmented Lagrangian.

use crate::error::{MisError, Result};
use crate::manifold::{inner_unchecked, project_tangent, retract, transport, ProductPoint, ProductTangent};

use super::lagrangian::Objective;
use super::RalmConfig;

#[derive(Debug, Clone)]
pub struct RcgOutcome {
    pub point: ProductPoint,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Line search failed along both the conjugate and steepest directions.
    pub stalled: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

struct Iterate {
    z: ProductPoint,
    value: f64,
    grad: ProductTangent,
}

fn iterate(obj: &Objective, z: ProductPoint, lambda: &[f64], rho: f64) -> Result<Iterate> {
    let eval = obj.evaluate(&z)?;
    let value = obj.lagrangian_value(&z, &eval, lambda, rho);
    let egrad = obj.gradient(&z, &eval, lambda, rho);
    let grad = project_tangent(&z, &egrad)?;
    Ok(Iterate { z, value, grad })
}

/// Armijo backtracking along `d`; `None` when no step is accepted.
fn line_search(
    obj: &Objective,
    cur: &Iterate,
    d: &ProductTangent,
    slope: f64,
    alpha0: f64,
    lambda: &[f64],
    rho: f64,
    cfg: &RalmConfig,
) -> Result<Option<(ProductPoint, f64)>> {
    let mut alpha = alpha0;
    for _ in 0..cfg.max_linesearch {
        match retract(&cur.z, d, alpha) {
            Ok(z) => {
                let eval = obj.evaluate(&z)?;
                let value = obj.lagrangian_value(&z, &eval, lambda, rho);
                if value <= cur.value + cfg.armijo_c1 * alpha * slope {
                    return Ok(Some((z, alpha)));
                }
            }
            Err(MisError::DegenerateStep { .. }) => {}
            Err(e) => return Err(e),
        }
        alpha *= cfg.backtrack_factor;
    }
    Ok(None)
}

/// Minimizes the augmented Lagrangian from `z0` until the Riemannian
/// gradient norm drops below `tol` or `max_inner` iterations elapse.
pub fn rcg_solve(
    obj: &Objective,
    z0: &ProductPoint,
    lambda: &[f64],
    rho: f64,
    tol: f64,
    cfg: &RalmConfig,
) -> Result<RcgOutcome> {
    let mut cur = iterate(obj, z0.clone(), lambda, rho)?;
    let mut trace = vec![cur.value];
    let mut d = cur.grad.scaled(-1.0);
    let mut alpha_guess = f64::NAN;
    let mut iterations = 0;
    let mut stalled = false;

    while iterations < cfg.max_inner {
        let gnorm = cur.grad.norm();
        if gnorm < tol {
            break;
        }
        let mut slope = inner_unchecked(&cur.grad, &d);
        if !(slope < 0.0) {
            d = cur.grad.scaled(-1.0);
            slope = -gnorm * gnorm;
        }
        let start = if alpha_guess.is_finite() {
            alpha_guess
        } else {
            1.0 / d.norm()
        };
        let mut accepted = line_search(obj, &cur, &d, slope, start, lambda, rho, cfg)?;
        if accepted.is_none() && slope != -gnorm * gnorm {
            d = cur.grad.scaled(-1.0);
            slope = -gnorm * gnorm;
            accepted = line_search(obj, &cur, &d, slope, 1.0 / d.norm(), lambda, rho, cfg)?;
        }
        let Some((z_new, alpha)) = accepted else {
            stalled = true;
            break;
        };
        iterations += 1;
        alpha_guess = 2.0 * alpha;

        let next = iterate(obj, z_new, lambda, rho)?;
        let g_old = transport(&next.z, &cur.grad)?;
        let d_old = transport(&next.z, &d)?;
        let denom = gnorm * gnorm;
        let pr = (inner_unchecked(&next.grad, &next.grad) - inner_unchecked(&next.grad, &g_old)) / denom;
        let beta = if pr.is_finite() { pr.max(0.0) } else { 0.0 };
        d = next.grad.scaled(-1.0).add_scaled(beta, &d_old);
        trace.push(next.value);
        cur = next;
    }

    let grad_norm = cur.grad.norm();
    Ok(RcgOutcome {
        point: cur.z,
        value: cur.value,
        grad_norm,
        iterations,
        stalled,
        trace,
    })
}
