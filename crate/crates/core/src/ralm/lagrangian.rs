//! Constraint values, augmented Lagrangian and its Euclidean gradient.

use num_complex::Complex64;

use crate::echo::{EchoModel, ResponseTable, TargetScene};
use crate::error::{check_len, MisError, Result};
use crate::geometry::MisGeometry;
use crate::manifold::{AmbientGradient, ProductPoint};

/// Relaxed max-min objective over a fixed scene. SINRs are divided by
/// `scale` so that solver quantities stay O(1) across power levels.
#[derive(Debug, Clone)]
pub struct Objective {
    model: EchoModel,
    scale: f64,
}

/// Everything the gradient needs from one evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub table: ResponseTable,
    /// Scaled SINR `γ_{k,u}`, row-major by target.
    pub gamma: Vec<f64>,
    /// Interference-plus-noise `b_{k,u}`.
    pub denom: Vec<f64>,
    pub q: Vec<f64>,
}

impl Objective {
    pub fn new(model: EchoModel) -> Self {
        Self { model, scale: 1.0 }
    }

    /// Scales SINRs by the largest single-target bound.
    pub fn normalized(model: EchoModel) -> Self {
        let m = model.geometry().m();
        let scale = (0..model.k())
            .map(|k| model.scene().single_target_bound(k, m))
            .fold(0.0, f64::max);
        Self { model, scale }
    }

    pub fn with_scale(model: EchoModel, scale: f64) -> Self {
        Self { model, scale }
    }

    pub fn model(&self) -> &EchoModel {
        &self.model
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn check(&self, z: &ProductPoint) -> Result<()> {
        check_len("phi", self.model.geometry().m(), z.phi.len())?;
        check_len("theta", self.model.geometry().n(), z.theta.len())?;
        check_len("targets", self.model.k(), z.k)?;
        check_len("patterns", self.model.u(), z.u)?;
        check_len("xi", z.k * z.u, z.xi.len())
    }

    pub fn evaluate(&self, z: &ProductPoint) -> Result<Evaluation> {
        self.check(z)?;
        Ok(self.evaluate_unchecked(z))
    }

    pub(crate) fn evaluate_unchecked(&self, z: &ProductPoint) -> Evaluation {
        let table = self.model.responses(&z.phi, &z.theta);
        let (kc, uc) = (table.k, table.u);
        let mut gamma = Vec::with_capacity(kc * uc);
        let mut denom = Vec::with_capacity(kc * uc);
        for k in 0..kc {
            for u in 0..uc {
                let b = self.model.interference_plus_noise(&table, k, u);
                denom.push(b);
                gamma.push(self.model.beta_sq(k) * table.gain(k, u).powi(2) / (b * self.scale));
            }
        }
        let q = (0..kc)
            .map(|k| {
                let row = k * uc..(k + 1) * uc;
                z.eta
                    - z.xi[row.clone()]
                        .iter()
                        .zip(&gamma[row])
                        .map(|(x, g)| x * g)
                        .sum::<f64>()
            })
            .collect();
        Evaluation {
            table,
            gamma,
            denom,
            q,
        }
    }

    /// `−η + (ρ/2) Σ_k max{0, λ_k/ρ + q_k}²`.
    pub fn lagrangian_value(&self, z: &ProductPoint, eval: &Evaluation, lambda: &[f64], rho: f64) -> f64 {
        let penalty: f64 = lambda
            .iter()
            .zip(&eval.q)
            .map(|(l, q)| (l / rho + q).max(0.0).powi(2))
            .sum();
        -z.eta + 0.5 * rho * penalty
    }

    pub fn value(&self, z: &ProductPoint, lambda: &[f64], rho: f64) -> Result<f64> {
        check_len("lambda", self.model.k(), lambda.len())?;
        check_rho(rho)?;
        let eval = self.evaluate(z)?;
        Ok(self.lagrangian_value(z, &eval, lambda, rho))
    }

    /// Euclidean gradient in the real-pair convention
    /// (`∂/∂Re + j ∂/∂Im` for complex coordinates).
    pub fn gradient(&self, z: &ProductPoint, eval: &Evaluation, lambda: &[f64], rho: f64) -> AmbientGradient {
        let model = &self.model;
        let (kc, uc) = (eval.table.k, eval.table.u);
        let chi: Vec<f64> = lambda
            .iter()
            .zip(&eval.q)
            .map(|(l, q)| if l / rho + q > 0.0 { l + rho * q } else { 0.0 })
            .collect();
        let mut grad = AmbientGradient {
            eta: -1.0 + chi.iter().sum::<f64>(),
            phi: vec![Complex64::new(0.0, 0.0); z.phi.len()],
            theta: vec![Complex64::new(0.0, 0.0); z.theta.len()],
            xi: vec![0.0; kc * uc],
        };
        if chi.iter().all(|&c| c == 0.0) {
            return grad;
        }
        for k in 0..kc {
            for u in 0..uc {
                grad.xi[k * uc + u] = -chi[k] * eval.gamma[k * uc + u];
            }
        }

        // ∂L/∂a_{i,u} via the shared sum T_u = Σ_k w_k γ_k / b_k.
        let mut da = vec![0.0; kc * uc];
        for u in 0..uc {
            let at = |k: usize| k * uc + u;
            let w = |k: usize| chi[k] * z.xi[at(k)];
            let t: f64 = (0..kc).map(|k| w(k) * eval.gamma[at(k)] / eval.denom[at(k)]).sum();
            for i in 0..kc {
                let own = w(i) * eval.gamma[at(i)] / eval.denom[at(i)];
                let a = eval.table.gain(i, u);
                da[at(i)] = -2.0 * model.beta_sq(i) * a
                    * (w(i) / (self.scale * eval.denom[at(i)]) - (t - own));
            }
        }

        let patterns = model.patterns();
        let phi = &z.phi;
        let theta_conj_m1: Vec<Complex64> = z.theta.iter().map(|t| t.conj() - 1.0).collect();
        let mut h = vec![Complex64::new(0.0, 0.0); phi.len()];
        for (i, coupling) in model.couplings().iter().enumerate() {
            let c = &coupling.values;
            let p: Vec<Complex64> = (0..uc).map(|u| eval.table.response(i, u) * da[i * uc + u]).collect();
            let total: Complex64 = p.iter().sum();
            h.iter_mut().for_each(|x| *x = total);
            for (pat, &pu) in patterns.iter().zip(&p) {
                if pu == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (n, &m) in pat.ms1_index.iter().enumerate() {
                    h[m] += pu * theta_conj_m1[n];
                    grad.theta[n] += 2.0 * pu * (c[m] * phi[m]).conj();
                }
            }
            for (g, (cm, hm)) in grad.phi.iter_mut().zip(c.iter().zip(&h)) {
                *g += 2.0 * cm.conj() * hm;
            }
        }
        grad
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(MisError::InvalidInput(format!("penalty must be > 0, got {rho}")))
    }
}

/// `q_k = η − Σ_u ξ_{k,u} γ_{k,u}`; non-positive when target `k` meets the slack.
pub fn constraint_value(k: usize, z: &ProductPoint, scene: &TargetScene, geom: &MisGeometry) -> Result<f64> {
    if k >= scene.k() {
        return Err(MisError::IndexOutOfRange {
            what: "target",
            index: k,
            limit: scene.k(),
        });
    }
    let obj = Objective::new(EchoModel::new(scene, geom)?);
    Ok(obj.evaluate(z)?.q[k])
}

pub fn aug_lagrangian(
    z: &ProductPoint,
    lambda: &[f64],
    rho: f64,
    scene: &TargetScene,
    geom: &MisGeometry,
) -> Result<f64> {
    Objective::new(EchoModel::new(scene, geom)?).value(z, lambda, rho)
}

pub fn euclid_grad(
    z: &ProductPoint,
    lambda: &[f64],
    rho: f64,
    scene: &TargetScene,
    geom: &MisGeometry,
) -> Result<AmbientGradient> {
    check_rho(rho)?;
    check_len("lambda", scene.k(), lambda.len())?;
    let obj = Objective::new(EchoModel::new(scene, geom)?);
    let eval = obj.evaluate(z)?;
    Ok(obj.gradient(z, &eval, lambda, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo::{PhaseDesign, Schedule};
    use crate::geometry::Direction;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn setup(snr_db: f64) -> (TargetScene, MisGeometry) {
        let g = MisGeometry::new(2, 2, 1, 1, 0.025 / 3.0, 0.025).unwrap();
        let dirs = [
            Direction::from_degrees(10.0, 35.0).unwrap(),
            Direction::from_degrees(70.0, 60.0).unwrap(),
        ];
        let s = TargetScene::from_echo_snr(&dirs, snr_db, 30.0, 1, Direction::boresight()).unwrap();
        (s, g)
    }

    fn random_point(rng: &mut ChaCha8Rng, g: &MisGeometry, k: usize) -> ProductPoint {
        let unit = |rng: &mut ChaCha8Rng, n| -> Vec<Complex64> {
            (0..n).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * TAU)).collect()
        };
        let phi = unit(rng, g.m());
        let theta = unit(rng, g.n());
        let mut xi = Vec::new();
        for _ in 0..k {
            let row: Vec<f64> = (0..g.u()).map(|_| rng.random::<f64>() + 0.1).collect();
            let s: f64 = row.iter().sum();
            xi.extend(row.iter().map(|x| x / s));
        }
        ProductPoint::new(rng.random::<f64>(), phi, theta, k, g.u())
            .unwrap()
            .with_xi(xi)
            .unwrap()
    }

    #[test]
    fn zero_slack_constraint_is_non_positive() {
        let (s, g) = setup(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut z = random_point(&mut rng, &g, 2);
        z.eta = 0.0;
        for k in 0..2 {
            assert!(constraint_value(k, &z, &s, &g).unwrap() <= 0.0);
        }
    }

    #[test]
    fn one_hot_constraint_matches_sinr() {
        let (s, g) = setup(-20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut z = random_point(&mut rng, &g, 2);
        z.xi = vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let d = PhaseDesign::new(z.phi.clone(), z.theta.clone()).unwrap();
        let model = EchoModel::new(&s, &g).unwrap();
        assert_relative_eq!(
            constraint_value(0, &z, &s, &g).unwrap(),
            z.eta - model.sinr(0, 2, &d).unwrap(),
            max_relative = 1e-12
        );
        let sched = Schedule::new(vec![2, 0], 4).unwrap();
        let sinrs = model.scheduled_sinrs(&d, &sched).unwrap();
        assert_relative_eq!(
            constraint_value(1, &z, &s, &g).unwrap(),
            z.eta - sinrs[1],
            max_relative = 1e-12
        );
    }

    #[test]
    fn lagrangian_branches() {
        let (s, g) = setup(-20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut z = random_point(&mut rng, &g, 2);
        z.eta = 0.0;
        // every q_k ≤ 0 with λ = 0 → inactive
        assert_relative_eq!(aug_lagrangian(&z, &[0.0, 0.0], 1.0, &s, &g).unwrap(), 0.0);
        let grad = euclid_grad(&z, &[0.0, 0.0], 1.0, &s, &g).unwrap();
        assert_eq!(grad.eta, -1.0);
        assert!(grad.xi.iter().all(|&x| x == 0.0));
        assert!(grad.phi.iter().chain(&grad.theta).all(|x| x.norm() == 0.0));

        // active branch: expansion −η + Σλq + (ρ/2)Σq² + Σλ²/(2ρ)
        z.eta = 1e3;
        let lambda = [0.7, 1.9];
        let rho = 2.5;
        let q: Vec<f64> = (0..2).map(|k| constraint_value(k, &z, &s, &g).unwrap()).collect();
        let expect = -z.eta
            + lambda.iter().zip(&q).map(|(l, q)| l * q).sum::<f64>()
            + 0.5 * rho * q.iter().map(|q| q * q).sum::<f64>()
            + lambda.iter().map(|l| l * l).sum::<f64>() / (2.0 * rho);
        assert_relative_eq!(
            aug_lagrangian(&z, &lambda, rho, &s, &g).unwrap(),
            expect,
            max_relative = 1e-12
        );
        assert!(aug_lagrangian(&z, &lambda, 0.0, &s, &g).is_err());
    }

    #[test]
    fn single_constraint_instantiation() {
        let g = MisGeometry::new(1, 1, 1, 1, 0.01, 0.025).unwrap();
        let s = TargetScene::from_echo_snr(
            &[Direction::boresight()],
            0.0,
            30.0,
            1,
            Direction::boresight(),
        )
        .unwrap();
        // single element: γ = β² P = 1 exactly, so η = 2 gives q = 1
        let z = ProductPoint::new(
            2.0,
            vec![Complex64::new(1.0, 0.0)],
            vec![Complex64::new(1.0, 0.0)],
            1,
            1,
        )
        .unwrap();
        assert_relative_eq!(constraint_value(0, &z, &s, &g).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(aug_lagrangian(&z, &[0.0], 2.0, &s, &g).unwrap(), -2.0 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn xi_gradient_is_non_positive() {
        let (s, g) = setup(-10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut z = random_point(&mut rng, &g, 2);
        z.eta = 50.0;
        let grad = euclid_grad(&z, &[0.5, 0.5], 1.0, &s, &g).unwrap();
        assert!(grad.xi.iter().all(|&x| x <= 0.0));
    }

    #[test]
    fn normalized_objective_scales_constraints() {
        let (s, g) = setup(-10.0);
        let model = EchoModel::new(&s, &g).unwrap();
        let raw = Objective::new(model.clone());
        let norm = Objective::normalized(model);
        assert_relative_eq!(norm.scale(), s.single_target_bound(0, 4), max_relative = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut z = random_point(&mut rng, &g, 2);
        z.eta = 0.0;
        let a = raw.evaluate(&z).unwrap();
        let b = norm.evaluate(&z).unwrap();
        for (x, y) in a.q.iter().zip(&b.q) {
            assert_relative_eq!(x / norm.scale(), *y, max_relative = 1e-12);
        }
    }
}
