use std::f64::consts::PI;

use ab_riesz::dyadic_bounds::PieceKind;
use ab_riesz::kernels::BRParams;
use ab_riesz::operator_lab::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

fn random_field(grid: &PolarGrid, seed: u64) -> SampledFunction<'_> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    SampledFunction::new(grid, values).unwrap()
}

fn inner(f: &SampledFunction, g: &SampledFunction) -> Complex64 {
    f.values.iter().zip(&g.values).zip(&f.grid.weights).map(|((a, b), w)| a.conj() * b * w).sum()
}

#[test]
fn critical_index_anchors() {
    assert_eq!(critical_index(2.0, 2).unwrap(), 0.0);
    assert_eq!(critical_index(4.0, 2).unwrap(), 0.0);
    assert!(critical_index(4.0 / 3.0, 2).unwrap().abs() < 1e-15);
    assert!((critical_index(8.0, 2).unwrap() - 0.25).abs() < 1e-15);
    assert!((critical_index(6.0, 2).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert!((critical_index(f64::INFINITY, 2).unwrap() - 0.5).abs() < 1e-15);
    assert!((critical_index(1.0, 2).unwrap() - 0.5).abs() < 1e-15);
    // continuity across p = 4
    assert!(critical_index(4.0 + 1e-9, 2).unwrap() < 1e-8);
    assert!(critical_index(0.5, 2).is_err());
}

#[test]
fn grid_layout_and_norms() {
    let grid = PolarGrid::new(64, 128, 2.0).unwrap();
    assert_eq!(grid.len(), 64 * 128);
    let (r, t) = grid.node(3 * 128 + 5);
    assert!((r - 3.5 * grid.dr).abs() < 1e-15 && (t - 5.0 * grid.dtheta).abs() < 1e-15);
    let disk = TestFunction::Disk.sample(&grid).unwrap();
    let l2 = lp_norm(&disk, 2.0).unwrap();
    assert!((l2 / PI.sqrt() - 1.0).abs() < 0.01, "{l2}");
    assert_eq!(lp_norm(&disk, f64::INFINITY).unwrap(), 1.0);
    assert!(lp_norm(&disk, 0.5).is_err());
    assert!(PolarGrid::new(0, 8, 1.0).is_err());
    assert!(PolarGrid::new(8, 8, -1.0).is_err());
}

#[test]
fn zero_input_gives_zero_output() {
    let grid = PolarGrid::new(32, 64, 1.0).unwrap();
    let params = BRParams::pure(0.5, 2.0, 0.5).unwrap();
    let out = apply_br(&SampledFunction::zeros(&grid), &params, Method::Series).unwrap();
    assert!(out.values.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
}

#[test]
fn br_operator_is_linear() {
    let grid = PolarGrid::new(32, 80, 1.0).unwrap();
    let op = br_operator(&grid, &BRParams::pure(0.3, 3.0, 0.5).unwrap(), Method::Series).unwrap();
    let (f, g) = (random_field(&grid, 1), random_field(&grid, 2));
    let c = Complex64::new(0.7, -1.3);
    let lhs = op.apply(&f.scaled(c).add(&g)).unwrap();
    let rhs = op.apply(&f).unwrap().scaled(c).add(&op.apply(&g).unwrap());
    let err = lp_norm(&lhs.sub(&rhs), 2.0).unwrap() / lp_norm(&rhs, 2.0).unwrap();
    assert!(err <= 1e-12, "{err}");
}

#[test]
fn adjoint_matches_weighted_inner_product() {
    let grid = PolarGrid::new(24, 64, 1.0).unwrap();
    let op = br_operator(&grid, &BRParams::pure(0.5, 2.0, 0.25).unwrap(), Method::Closed).unwrap();
    let (f, g) = (random_field(&grid, 3), random_field(&grid, 4));
    let tf = op.apply(&f).unwrap();
    let tsg = SampledFunction::new(&grid, op.apply_adjoint_values(&g.values).unwrap()).unwrap();
    let (a, b) = (inner(&tf, &g), inner(&f, &tsg));
    assert!((a - b).norm() <= 1e-12 * a.norm(), "{a} vs {b}");
}

#[test]
fn closed_and_series_operators_agree() {
    let grid = PolarGrid::new(64, 64, 0.6).unwrap();
    let params = BRParams::pure(0.5, 4.0, 0.5).unwrap();
    let f = TestFunction::Packet.sample(&grid).unwrap();
    let a = apply_br(&f, &params, Method::Closed).unwrap();
    let b = apply_br(&f, &params, Method::Series).unwrap();
    let rel = lp_norm(&a.sub(&b), 2.0).unwrap() / lp_norm(&b, 2.0).unwrap();
    assert!(rel <= 1e-5, "{rel}");
}

#[test]
fn l2_norm_at_most_one() {
    let grid = PolarGrid::new(64, 64, 1.0).unwrap();
    for &delta in &[0.0, 0.5] {
        let op = br_operator(&grid, &BRParams::pure(0.5, 2.0, delta).unwrap(), Method::Series).unwrap();
        let pi = power_iteration(&op, POWER_ITERATIONS, DEFAULT_SEED).unwrap();
        assert!(pi.estimate > 0.1 && pi.estimate <= 1.05, "delta = {delta}: {}", pi.estimate);
        assert_eq!(pi.history.len(), POWER_ITERATIONS);
    }
}

#[test]
fn gauge_shift_preserves_norms() {
    let grid = PolarGrid::new(32, 80, 1.0).unwrap();
    let f = TestFunction::Packet.sample(&grid).unwrap();
    let shifted = SampledFunction::from_fn(&grid, |r, t| TestFunction::Packet.eval(r, t) * Complex64::from_polar(1.0, -t)).unwrap();
    let a = apply_br(&f, &BRParams::pure(0.3, 3.0, 0.5).unwrap(), Method::Series).unwrap();
    let b = apply_br(&shifted, &BRParams::pure(1.3, 3.0, 0.5).unwrap(), Method::Series).unwrap();
    for &p in &[2.0, 6.0] {
        let (na, nb) = (lp_norm(&a, p).unwrap(), lp_norm(&b, p).unwrap());
        assert!((na - nb).abs() <= 1e-10 * na, "p = {p}: {na} vs {nb}");
    }
}

#[test]
fn under_resolved_grid_is_refused() {
    let grid = PolarGrid::new(64, 64, 2.0).unwrap();
    let params = BRParams::pure(0.5, 8.0, 0.5).unwrap();
    match apply_br(&TestFunction::Disk.sample(&grid).unwrap(), &params, Method::Series) {
        Err(LabError::Resolution { required_nr, required_ntheta, .. }) => {
            assert_eq!(required_nr, 64);
            assert_eq!(required_ntheta, (8.0 * PI * 16.0f64).ceil() as usize);
        }
        other => panic!("expected a resolution error, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn test_functions_parse_and_sample() {
    for name in ["disk", "annulus", "gaussian", "packet"] {
        assert!(name.parse::<TestFunction>().is_ok());
    }
    assert!("square".parse::<TestFunction>().is_err());
    assert_eq!(TestFunction::Annulus.eval(0.25, 0.0), Complex64::new(0.0, 0.0));
    assert_eq!(TestFunction::Annulus.eval(0.75, 0.0), Complex64::new(1.0, 0.0));
    assert!((TestFunction::Packet.eval(0.5, 0.0).norm() - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!("closed".parse::<Method>().unwrap(), Method::Closed);
}

#[test]
fn smooth_function_converges_in_l2() {
    let grid = PolarGrid::new(48, 256, 1.5).unwrap();
    let r = convergence_experiment(TestFunction::Gaussian, 2.0, 0.0, 0.5, &[2.0, 4.0, 6.0], &grid, Method::Series).unwrap();
    assert_eq!(r.status, ConvergenceStatus::Decreasing, "{:?}", r.errors);
    assert!(r.slope.unwrap() < STALL_SLOPE);
}

#[test]
fn slope_fit() {
    assert!((fit_slope(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0]).unwrap() - 2.0).abs() < 1e-14);
    assert!(fit_slope(&[1.0], &[1.0]).is_none());
}

#[test]
fn dyadic_grids_scale_with_j() {
    let g = dyadic_grid(3, 0.5).unwrap();
    assert_eq!(g.radius, 16.0);
    assert_eq!(g.nr(), 32);
    assert_eq!(g.ntheta() % 2, 0);
    assert!(g.ntheta() as f64 >= 2.0 * PI * 16.0 / 0.5);
}

#[test]
fn scaling_rejects_unsupported_exponents() {
    let cfg = ScalingConfig::default();
    assert!(dyadic_norm_scaling(PieceKind::G, 0.5, 0.5, 3.0, &[1, 2], &cfg).is_err());
    assert!(dyadic_norm_scaling(PieceKind::G, 0.5, 0.5, 2.0, &[9], &cfg).is_err());
}

#[test]
fn d_piece_scaling_vanishes_at_integer_flux() {
    let r = dyadic_norm_scaling(PieceKind::D1, 1.0, 0.5, 2.0, &[1, 2], &ScalingConfig::default()).unwrap();
    assert!(r.norms.iter().all(|&n| n == 0.0));
    assert!(r.slope.is_none() && r.pass);
}

#[test]
fn input_battery_is_reproducible() {
    let grid = dyadic_grid(1, 0.5).unwrap();
    let a = input_battery(&grid, 1, 2, 5).unwrap();
    let b = input_battery(&grid, 1, 2, 5).unwrap();
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.values == y.values));
}
