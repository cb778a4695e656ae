//! Central finite differences against the analytic augmented-Lagrangian gradient.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::manifold::{AmbientGradient, ProductPoint};

use super::lagrangian::Objective;

/// Relative error `‖fd − an‖ / max(‖an‖, tiny)` per block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub eta: f64,
    pub xi: f64,
    pub phi: f64,
    pub theta: f64,
}

impl GradCheck {
    pub fn max(&self) -> f64 {
        self.eta.max(self.xi).max(self.phi).max(self.theta)
    }
}

fn rel(fd: &[f64], an: &[f64]) -> f64 {
    let diff: f64 = fd.iter().zip(an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = an.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

fn split(x: &[Complex64]) -> Vec<f64> {
    x.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Differentiates the ambient function, so perturbed points may leave the manifold.
pub fn gradient_check(obj: &Objective, z: &ProductPoint, lambda: &[f64], rho: f64, step: f64) -> Result<GradCheck> {
    let eval = obj.evaluate(z)?;
    let an: AmbientGradient = obj.gradient(z, &eval, lambda, rho);
    let f = |p: &ProductPoint| -> Result<f64> { obj.value(p, lambda, rho) };
    let central = |plus: ProductPoint, minus: ProductPoint| -> Result<f64> {
        Ok((f(&plus)? - f(&minus)?) / (2.0 * step))
    };

    let fd_eta = {
        let (mut p, mut m) = (z.clone(), z.clone());
        p.eta += step;
        m.eta -= step;
        central(p, m)?
    };
    let mut fd_xi = Vec::with_capacity(z.xi.len());
    for i in 0..z.xi.len() {
        let (mut p, mut m) = (z.clone(), z.clone());
        p.xi[i] += step;
        m.xi[i] -= step;
        fd_xi.push(central(p, m)?);
    }
    let complex_fd = |get: fn(&mut ProductPoint) -> &mut Vec<Complex64>, n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            for delta in [Complex64::new(step, 0.0), Complex64::new(0.0, step)] {
                let (mut p, mut m) = (z.clone(), z.clone());
                get(&mut p)[i] += delta;
                get(&mut m)[i] -= delta;
                out.push(central(p, m)?);
            }
        }
        Ok(out)
    };
    let fd_phi = complex_fd(|p| &mut p.phi, z.phi.len())?;
    let fd_theta = complex_fd(|p| &mut p.theta, z.theta.len())?;

    Ok(GradCheck {
        eta: rel(&[fd_eta], &[an.eta]),
        xi: rel(&fd_xi, &an.xi),
        phi: rel(&fd_phi, &split(&an.phi)),
        theta: rel(&fd_theta, &split(&an.theta)),
    })
}

/// Random manifold point with every constraint active, plus multipliers.
pub fn random_active_point(obj: &Objective, rng: &mut ChaCha8Rng) -> Result<(ProductPoint, Vec<f64>, f64)> {
    let model = obj.model();
    let (k, u) = (model.k(), model.u());
    let unit = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
            .collect()
    };
    let phi = unit(rng, model.geometry().m());
    let theta = unit(rng, model.geometry().n());
    let mut xi = Vec::with_capacity(k * u);
    for _ in 0..k {
        let row: Vec<f64> = (0..u).map(|_| 0.1 + rng.random::<f64>()).collect();
        let s: f64 = row.iter().sum();
        xi.extend(row.into_iter().map(|x| x / s));
    }
    let mut z = ProductPoint::new(0.0, phi, theta, k, u)?.with_xi(xi)?;
    let eval = obj.evaluate(&z)?;
    let top = eval.gamma.iter().copied().fold(0.0, f64::max);
    z.eta = (1.5 + rng.random::<f64>()) * top.max(f64::MIN_POSITIVE);
    let lambda = (0..k).map(|_| 0.5 + rng.random::<f64>()).collect();
    let rho = 0.5 + rng.random::<f64>();
    Ok((z, lambda, rho))
}
