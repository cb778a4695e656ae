use mis_core::closed_form::{recover_angles, steering_displacement};
use mis_core::echo::{EchoModel, PhaseDesign, TargetScene};
use mis_core::geometry::{Direction, MisGeometry};
use mis_core::manifold::{project_tangent, retract, simplex_project, ProductPoint, ProductTangent, SIMPLEX_FLOOR};
use num_complex::Complex64;
use proptest::prelude::*;

const LAMBDA: f64 = 0.025;

fn unit(phases: &[f64]) -> Vec<Complex64> {
    phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
}

fn complex(parts: &[(f64, f64)]) -> Vec<Complex64> {
    parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
}

proptest! {
    #[test]
    fn simplex_projection_lands_on_floored_simplex(y in prop::collection::vec(-1e3f64..1e3, 1..12)) {
        let x = simplex_project(&y);
        prop_assert_eq!(x.len(), y.len());
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(x.iter().all(|&v| v >= SIMPLEX_FLOOR * 0.5));
        // projecting twice changes nothing beyond the floor
        let again = simplex_project(&x);
        for (a, b) in x.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn tangent_projection_is_idempotent(
        phases in prop::collection::vec(0.0f64..6.3, 6),
        g in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 6),
        xi in prop::collection::vec(-5.0f64..5.0, 8),
        alpha in 0.0f64..3.0,
    ) {
        let z = ProductPoint::new(0.1, unit(&phases[..4]), unit(&phases[4..]), 2, 4).unwrap();
        let amb = ProductTangent { eta: 1.0, phi: complex(&g[..4]), theta: complex(&g[4..]), xi };
        let t = project_tangent(&z, &amb).unwrap();
        prop_assert!(t.tangency_residual(&z) < 1e-12);
        let tt = project_tangent(&z, &t).unwrap();
        prop_assert!(tt.add_scaled(-1.0, &t).norm() < 1e-12);
        let moved = retract(&z, &t, alpha).unwrap();
        prop_assert!(moved.validate(1e-12).is_ok());
    }

    #[test]
    fn steering_round_trip(az in -3.1f64..3.1, el in 0.01f64..1.56, scale in 0.2f64..5.0) {
        let g = MisGeometry::new(20, 20, 16, 16, LAMBDA / 3.0, LAMBDA).unwrap();
        let a = scale * g.wavenumber();
        let t = Direction::new(az, el).unwrap();
        let (dx, dy) = steering_displacement(a, &g, t);
        let back = recover_angles(a, &g, dx, dy).unwrap();
        prop_assert!((back.elevation - el).abs() < 1e-12);
        prop_assert!((back.azimuth - az).abs() < 1e-12);
    }

    #[test]
    fn pattern_index_round_trip(mr in 2usize..7, mc in 2usize..7, nr in 1usize..3, nc in 1usize..3) {
        let g = MisGeometry::new(mr, mc, nr, nc, LAMBDA / 2.0, LAMBDA).unwrap();
        for u in 0..g.u() {
            let (r, c) = g.pattern_offsets(u).unwrap();
            prop_assert_eq!(g.pattern_index(r, c).unwrap(), u);
        }
    }

    #[test]
    fn sinr_follows_target_permutation(phases in prop::collection::vec(0.0f64..6.3, 13), rot in 0usize..3) {
        let g = MisGeometry::new(3, 3, 2, 2, LAMBDA / 3.0, LAMBDA).unwrap();
        let dirs: Vec<Direction> = [(0.0, 30.0), (45.0, 50.0), (90.0, 70.0)]
            .iter()
            .map(|&(a, e)| Direction::from_degrees(a, e).unwrap())
            .collect();
        let s = TargetScene::from_echo_snr(&dirs, -40.0, 30.0, 1, Direction::boresight()).unwrap();
        let order: Vec<usize> = (0..3).map(|i| (i + rot) % 3).collect();
        let p = s.permuted(&order).unwrap();
        let design = PhaseDesign::new(unit(&phases[..9]), unit(&phases[9..])).unwrap();
        let a = EchoModel::new(&s, &g).unwrap().sinr_table(&design).unwrap();
        let b = EchoModel::new(&p, &g).unwrap().sinr_table(&design).unwrap();
        for (k, &src) in order.iter().enumerate() {
            for u in 0..g.u() {
                prop_assert!((a[src][u] - b[k][u]).abs() <= 1e-12 * a[src][u].abs().max(1e-300));
            }
        }
    }

    #[test]
    fn power_scales_noise_limited_sinr(phases in prop::collection::vec(0.0f64..6.3, 13)) {
        let g = MisGeometry::new(3, 3, 2, 2, LAMBDA / 3.0, LAMBDA).unwrap();
        let dirs = [Direction::from_degrees(20.0, 40.0).unwrap()];
        let s = TargetScene::from_echo_snr(&dirs, -40.0, 30.0, 1, Direction::boresight()).unwrap();
        let s10 = s.with_tx_power(10.0 * s.tx_power()).unwrap();
        let design = PhaseDesign::new(unit(&phases[..9]), unit(&phases[9..])).unwrap();
        let a = EchoModel::new(&s, &g).unwrap().sinr_table(&design).unwrap();
        let b = EchoModel::new(&s10, &g).unwrap().sinr_table(&design).unwrap();
        for u in 0..g.u() {
            prop_assert!((b[0][u] - 10.0 * a[0][u]).abs() <= 1e-9 * b[0][u]);
        }
    }
}
