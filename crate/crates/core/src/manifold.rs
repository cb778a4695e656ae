//! Product manifold `ℝ × (circle)ᴹ × (circle)ᴺ × (simplex)ᴷ` housing the
//! relaxed max-min problem: the slack `η`, both phase layers and the
//! row-stochastic relaxed schedule `Ξ` (K × U, row-major).

use num_complex::Complex64;

use crate::error::{check_len, MisError, Result};

/// Strict-positivity floor applied to every simplex entry after projection.
pub const SIMPLEX_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    pub eta: f64,
    pub phi: Vec<Complex64>,
    pub theta: Vec<Complex64>,
    /// `xi[k * u + j]`.
    pub xi: Vec<f64>,
    pub k: usize,
    pub u: usize,
}

/// Tangent vector, or ambient gradient when not yet projected.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTangent {
    pub eta: f64,
    pub phi: Vec<Complex64>,
    pub theta: Vec<Complex64>,
    pub xi: Vec<f64>,
}

pub type AmbientGradient = ProductTangent;

impl ProductPoint {
    /// Uniform `Ξ = 1/U`.
    pub fn new(eta: f64, phi: Vec<Complex64>, theta: Vec<Complex64>, k: usize, u: usize) -> Result<Self> {
        if k == 0 || u == 0 {
            return Err(MisError::InvalidInput("Ξ needs K ≥ 1 and U ≥ 1".into()));
        }
        let p = Self {
            eta,
            phi,
            theta,
            xi: vec![1.0 / u as f64; k * u],
            k,
            u,
        };
        p.validate(1e-9)?;
        Ok(p)
    }

    pub fn with_xi(mut self, xi: Vec<f64>) -> Result<Self> {
        check_len("xi", self.k * self.u, xi.len())?;
        self.xi = xi;
        Ok(self)
    }

    pub fn xi_row(&self, k: usize) -> &[f64] {
        &self.xi[k * self.u..(k + 1) * self.u]
    }

    /// Checks unit modulus and row-stochastic `Ξ` to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        check_len("xi", self.k * self.u, self.xi.len())?;
        if !self.eta.is_finite() {
            return Err(MisError::InvalidInput("non-finite η".into()));
        }
        for (what, x) in [("phi", &self.phi), ("theta", &self.theta)] {
            if x.iter().any(|z| !((z.norm() - 1.0).abs() <= tol)) {
                return Err(MisError::InvalidInput(format!("{what} leaves the unit circle")));
            }
        }
        for k in 0..self.k {
            let row = self.xi_row(k);
            let sum: f64 = row.iter().sum();
            if !((sum - 1.0).abs() <= tol) || row.iter().any(|&x| !(x > 0.0)) {
                return Err(MisError::InvalidInput(format!("Ξ row {k} is not on the open simplex")));
            }
        }
        Ok(())
    }

    fn check_shape(&self, d: &ProductTangent) -> Result<()> {
        check_len("phi", self.phi.len(), d.phi.len())?;
        check_len("theta", self.theta.len(), d.theta.len())?;
        check_len("xi", self.xi.len(), d.xi.len())
    }
}

impl ProductTangent {
    pub fn zeros_like(z: &ProductPoint) -> Self {
        Self {
            eta: 0.0,
            phi: vec![Complex64::new(0.0, 0.0); z.phi.len()],
            theta: vec![Complex64::new(0.0, 0.0); z.theta.len()],
            xi: vec![0.0; z.xi.len()],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            eta: self.eta * s,
            phi: self.phi.iter().map(|x| x * s).collect(),
            theta: self.theta.iter().map(|x| x * s).collect(),
            xi: self.xi.iter().map(|x| x * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        Self {
            eta: self.eta + s * other.eta,
            phi: self.phi.iter().zip(&other.phi).map(|(a, b)| a + b * s).collect(),
            theta: self.theta.iter().zip(&other.theta).map(|(a, b)| a + b * s).collect(),
            xi: self.xi.iter().zip(&other.xi).map(|(a, b)| a + b * s).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        inner_unchecked(self, self).max(0.0).sqrt()
    }

    /// Largest violation of the tangency conditions at `z`.
    pub fn tangency_residual(&self, z: &ProductPoint) -> f64 {
        let circle = |x: &[Complex64], t: &[Complex64]| {
            x.iter()
                .zip(t)
                .map(|(x, t)| (x.conj() * t).re.abs())
                .fold(0.0, f64::max)
        };
        let rows = (0..z.k)
            .map(|k| self.xi[k * z.u..(k + 1) * z.u].iter().sum::<f64>().abs())
            .fold(0.0, f64::max);
        circle(&z.phi, &self.phi).max(circle(&z.theta, &self.theta)).max(rows)
    }
}

fn project_circle(x: &[Complex64], g: &[Complex64]) -> Vec<Complex64> {
    x.iter()
        .zip(g)
        .map(|(x, g)| g - x * (g * x.conj()).re)
        .collect()
}

fn center_rows(g: &[f64], u: usize) -> Vec<f64> {
    let mut out = g.to_vec();
    for row in out.chunks_mut(u) {
        let mean = row.iter().sum::<f64>() / u as f64;
        row.iter_mut().for_each(|x| *x -= mean);
    }
    out
}

/// Orthogonal projection of an ambient vector onto the tangent space at `z`.
pub fn project_tangent(z: &ProductPoint, g: &AmbientGradient) -> Result<ProductTangent> {
    z.check_shape(g)?;
    Ok(ProductTangent {
        eta: g.eta,
        phi: project_circle(&z.phi, &g.phi),
        theta: project_circle(&z.theta, &g.theta),
        xi: center_rows(&g.xi, z.u),
    })
}

/// Euclidean projection onto the probability simplex (sort and threshold),
/// followed by the positivity floor and renormalization.
pub fn simplex_project(y: &[f64]) -> Vec<f64> {
    if y.is_empty() {
        return Vec::new();
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    let mut x: Vec<f64> = y.iter().map(|&v| (v - tau).max(SIMPLEX_FLOOR)).collect();
    let sum: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= sum);
    x
}

fn retract_circle(x: &[Complex64], d: &[Complex64], alpha: f64, offset: usize) -> Result<Vec<Complex64>> {
    x.iter()
        .zip(d)
        .enumerate()
        .map(|(i, (x, d))| {
            let y = x + d * alpha;
            let r = y.norm();
            if r == 0.0 || !r.is_finite() {
                Err(MisError::DegenerateStep { index: offset + i })
            } else {
                Ok(y / r)
            }
        })
        .collect()
}

/// Moves from `z` along `d` by `alpha` and maps back onto the manifold.
/// Degenerate-step indices count MS1 elements first, then MS2.
pub fn retract(z: &ProductPoint, d: &ProductTangent, alpha: f64) -> Result<ProductPoint> {
    z.check_shape(d)?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(MisError::InvalidInput(format!("step size must be ≥ 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(z.clone());
    }
    let phi = retract_circle(&z.phi, &d.phi, alpha, 0)?;
    let theta = retract_circle(&z.theta, &d.theta, alpha, z.phi.len())?;
    let mut xi = Vec::with_capacity(z.xi.len());
    for (row, drow) in z.xi.chunks(z.u).zip(d.xi.chunks(z.u)) {
        let y: Vec<f64> = row.iter().zip(drow).map(|(x, t)| x + alpha * t).collect();
        xi.extend(simplex_project(&y));
    }
    Ok(ProductPoint {
        eta: z.eta + alpha * d.eta,
        phi,
        theta,
        xi,
        k: z.k,
        u: z.u,
    })
}

/// Carries a tangent vector to the tangent space at `z_new`.
pub fn transport(z_new: &ProductPoint, d_old: &ProductTangent) -> Result<ProductTangent> {
    project_tangent(z_new, d_old)
}

/// Flat product metric.
pub fn inner(a: &ProductTangent, b: &ProductTangent) -> Result<f64> {
    check_len("phi", a.phi.len(), b.phi.len())?;
    check_len("theta", a.theta.len(), b.theta.len())?;
    check_len("xi", a.xi.len(), b.xi.len())?;
    Ok(inner_unchecked(a, b))
}

pub(crate) fn inner_unchecked(a: &ProductTangent, b: &ProductTangent) -> f64 {
    let c = |x: &[Complex64], y: &[Complex64]| -> f64 {
        x.iter().zip(y).map(|(p, q)| p.re * q.re + p.im * q.im).sum()
    };
    let f: f64 = a.xi.iter().zip(&b.xi).map(|(p, q)| p * q).sum();
    a.eta * b.eta + c(&a.phi, &b.phi) + c(&a.theta, &b.theta) + f
}
