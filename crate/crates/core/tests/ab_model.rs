use std::f64::consts::{PI, TAU};

use ab_riesz::ab_model::*;
use num_complex::Complex64;

fn pt(r: f64, t: f64) -> PolarPoint {
    PolarPoint::new(r, t).unwrap()
}

fn tabulated(n: usize, f: impl Fn(f64) -> f64) -> AngularPotential {
    let samples = (0..n).map(|k| f(TAU * k as f64 / n as f64)).collect();
    AngularPotential::Tabulated(TabulatedPotential::from_samples(samples).unwrap())
}

// mpmath, pure potential, theta2 = 0: (alpha, dtheta, s, B)
const B_ORACLES: [(f64, f64, f64, (f64, f64)); 3] = [
    (0.5, 0.0, 1.0, (-0.022463384750056223, 0.0)),
    (0.3, 1.1, 0.4, (-0.019980603354334408, 0.011986200539828878)),
    (-0.2, -2.5, 2.0, (-0.0086051189776732355, 0.003253206360766501)),
];

#[test]
fn flux_of_potentials() {
    assert_eq!(flux(&AngularPotential::pure(0.5)), 0.5);
    assert!((flux(&tabulated(32, |t| 0.3 + 0.1 * t.sin())) - 0.3).abs() < 1e-15);
    assert!((flux(&tabulated(32, |t| 0.3 + 0.1 * t.cos().powi(2))) - 0.35).abs() < 1e-15);
}

#[test]
fn flux_reduction() {
    for &(alpha, m, a0) in &[(0.5, 0, 0.5), (-0.5, -1, 0.5), (1.25, 1, 0.25), (-0.7, -1, 0.3), (3.0, 3, 0.0)] {
        let f = FluxParameter::new(alpha);
        assert_eq!(f.m, m, "alpha = {alpha}");
        assert!((f.alpha0 - a0).abs() < 1e-15, "alpha = {alpha}");
    }
    assert!(FluxParameter::new(-2.0).is_integer());
    assert!(!FluxParameter::new(0.01).is_integer());
}

#[test]
fn eigen_orders() {
    assert_eq!(eigen_nu(0, 0.5), 0.5);
    assert_eq!(eigen_nu(-1, 0.5), 0.5);
    assert_eq!(eigen_nu(3, -0.25), 2.75);
}

#[test]
fn eigenfunctions_are_orthonormal() {
    let pot = AngularPotential::pure(0.3);
    assert!((eigenfunction(0, 0.0, &pot) - Complex64::new(1.0 / TAU.sqrt(), 0.0)).norm() < 1e-15);
    let n = 256;
    let thetas: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
    for k in -8..=8 {
        for j in -8..=8 {
            let ip: Complex64 =
                thetas.iter().map(|&t| eigenfunction(k, t, &pot) * eigenfunction(j, t, &pot).conj()).sum::<Complex64>() * (TAU / n as f64);
            let want = if k == j { 1.0 } else { 0.0 };
            assert!((ip - want).norm() < 1e-10, "k = {k}, j = {j}: {ip}");
        }
    }
}

#[test]
fn eigenfunction_modulus_with_tabulated_potential() {
    let pot = tabulated(16, |t| 0.4 + 0.2 * t.cos());
    for &t in &[0.0, 0.7, 2.0, 5.5] {
        assert!((eigenfunction(2, t, &pot).norm() - 1.0 / TAU.sqrt()).abs() < 1e-14);
    }
}

#[test]
fn distance_anchors() {
    assert!((distance_d(&pt(1.5, 0.4), &pt(0.5, 0.4)) - 1.0).abs() < 1e-15);
    assert!((distance_d(&pt(1.5, 0.0), &pt(0.5, PI)) - 2.0).abs() < 1e-15);
    assert!((distance_d(&pt(1.0, 0.0), &pt(1.0, PI / 2.0)) - 2f64.sqrt()).abs() < 1e-15);
    assert!((distance_ds(0.0, &pt(1.5, 0.0), &pt(0.5, 1.0)) - 2.0).abs() < 1e-15);
    let g = GeometricFactors::new(&pt(1.5, 0.0), &pt(0.5, 1.0));
    assert!((g.d_s(2.0) - distance_ds(2.0, &pt(1.5, 0.0), &pt(0.5, 1.0))).abs() < 1e-15);
    for &s in &[0.0, 1.0, 10.0] {
        assert!((distance_ds(s, &pt(2.0, 0.0), &pt(1e-12, 0.0)) - 2.0).abs() < 1e-6);
    }
    // large-s branch is continuous with the direct formula
    let (x, y) = (pt(0.7, 0.0), pt(1.3, 2.0));
    let direct = |s: f64| (0.7f64.powi(2) + 1.3f64.powi(2) + 2.0 * 0.7 * 1.3 * s.cosh()).sqrt();
    for &s in &[39.9, 40.1] {
        assert!((distance_ds(s, &x, &y) / direct(s) - 1.0).abs() < 1e-13);
    }
}

#[test]
fn polar_points_validate_and_wrap() {
    assert!(PolarPoint::new(0.0, 1.0).is_err());
    assert!(PolarPoint::new(-1.0, 1.0).is_err());
    assert!(PolarPoint::new(1.0, f64::NAN).is_err());
    let p = pt(1.0, -0.5);
    assert!((p.theta - (TAU - 0.5)).abs() < 1e-15);
}

#[test]
fn a_factor_anchors() {
    let free = FluxParameter::new(0.0);
    let pot0 = AngularPotential::pure(0.0);
    let a = a_factor(1.0, 0.3, &free, &pot0);
    assert!((a - Complex64::new(1.0 / (4.0 * PI * PI), 0.0)).norm() < 1e-17);
    let half = FluxParameter::new(0.5);
    let pot = AngularPotential::pure(0.5);
    let want = Complex64::from_polar(1.0, -0.75 * PI) * Complex64::from_polar(1.0, -PI) / (4.0 * PI * PI);
    assert!((a_factor(1.5 * PI, 0.0, &half, &pot) - want).norm() < 1e-16);
}

#[test]
fn a_factor_averages_at_half_turn() {
    let f = FluxParameter::new(0.3);
    let pot = AngularPotential::pure(0.3);
    let inside = a_factor(PI - 1e-12, 0.0, &f, &pot);
    let outside = a_factor(PI + 1e-12, 0.0, &f, &pot);
    let at = a_factor(PI, 0.0, &f, &pot);
    assert!((at - 0.5 * (inside + outside)).norm() < 1e-12);
}

#[test]
fn b_factor_oracles() {
    for &(alpha, dth, s, want) in &B_ORACLES {
        let got = b_factor(s, dth, 0.0, &FluxParameter::new(alpha), &AngularPotential::pure(alpha));
        assert!((got - Complex64::new(want.0, want.1)).norm() < 1e-15, "alpha = {alpha}: {got}");
    }
}

#[test]
fn b_factor_vanishes_at_integer_flux() {
    for &alpha in &[0.0, 1.0, -2.0] {
        for &(s, dth) in &[(0.0, 0.5), (1.0, PI), (3.0, -2.0)] {
            let v = b_factor(s, dth, 0.0, &FluxParameter::new(alpha), &AngularPotential::pure(alpha));
            assert_eq!(v, Complex64::new(0.0, 0.0));
        }
    }
}

#[test]
fn b_factor_removable_point_is_finite_and_continuous() {
    let f = FluxParameter::new(0.5);
    let pot = AngularPotential::pure(0.5);
    let at = b_factor(0.0, PI, 0.0, &f, &pot);
    assert!(at.re.is_finite() && at.im.is_finite());
    let near = b_factor(1e-5, PI, 0.0, &f, &pot);
    assert!((at - near).norm() < 1e-3);
}

#[test]
fn b_factor_decays_like_reduced_flux() {
    for &alpha in &[0.3, 0.5, -0.49, 1.25] {
        let f = FluxParameter::new(alpha);
        let pot = AngularPotential::pure(alpha);
        let rate = f.alpha0.abs();
        for &dth in &[0.0, 1.0, PI - 1e-3, -2.5] {
            let early = b_factor(5.0, dth, 0.0, &f, &pot).norm() * (5.0 * rate).exp();
            let late = b_factor(30.0, dth, 0.0, &f, &pot).norm() * (30.0 * rate).exp();
            assert!(late <= 10.0 * early.max(1e-3), "alpha = {alpha}, dtheta = {dth}: {late} vs {early}");
        }
    }
}

#[test]
fn b_integral_finite_and_zero_at_integer_flux() {
    let grid = [0.0, PI / 2.0, PI - 1e-3, PI];
    let v = b_integral_check(&grid, &FluxParameter::new(0.5)).unwrap();
    assert!(v.is_finite() && v > 0.0);
    assert_eq!(b_integral_check(&grid, &FluxParameter::new(2.0)).unwrap(), 0.0);
}

#[test]
fn tabulated_potential_rejects_bad_tables() {
    assert!(TabulatedPotential::from_samples(vec![1.0]).is_err());
    assert!(TabulatedPotential::from_samples(vec![1.0, f64::NAN, 0.0]).is_err());
}

#[test]
fn tabulated_potential_file_roundtrip() {
    let dir = std::env::temp_dir().join(format!("ab-riesz-pot-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("pot.txt");
    let samples: Vec<f64> = (0..8).map(|k| 0.25 + 0.1 * (TAU * k as f64 / 8.0).cos()).collect();
    let rows: Vec<String> = samples.iter().enumerate().map(|(k, v)| format!("{}, {v}", TAU * k as f64 / 8.0)).collect();
    std::fs::write(&path, format!("# theta, A\n{}\n", rows.join("\n"))).unwrap();
    let t = TabulatedPotential::from_file(&path).unwrap();
    assert_eq!(t.samples(), samples.as_slice());
    std::fs::remove_dir_all(&dir).unwrap();
}
