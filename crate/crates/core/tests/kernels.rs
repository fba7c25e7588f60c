use std::f64::consts::PI;

use ab_riesz::ab_model::PolarPoint;
use ab_riesz::kernels::*;
use num_complex::Complex64;

fn pt(r: f64, t: f64) -> PolarPoint {
    PolarPoint::new(r, t).unwrap()
}

// high-precision partial-wave sums (mpmath, 30 digits)
const SERIES_ORACLES: [(f64, f64, f64, (f64, f64), (f64, f64), (f64, f64)); 3] = [
    (0.5, 4.0, 0.5, (1.0, 0.3), (0.8, 2.0), (-0.045168411099327046, -0.051416679958914514)),
    (-0.7, 2.0, 0.0, (0.6, 5.5), (1.4, 0.2), (0.12158300407831285, -0.097761300787007961)),
    (1.25, 1.5, 1.0, (2.0, 4.0), (0.3, 1.0), (-0.015178472077242535, -0.0012491562080609524)),
];

#[test]
fn series_matches_high_precision_oracle() {
    for &(alpha, lambda, delta, x, y, want) in &SERIES_ORACLES {
        let p = BRParams::pure(alpha, lambda, delta).unwrap().with_tol(1e-12);
        let (v, diag) = br_kernel_series(&pt(x.0, x.1), &pt(y.0, y.1), &p).unwrap();
        let want = Complex64::new(want.0, want.1);
        assert!((v - want).norm() < 1e-10, "alpha = {alpha}: {v} vs {want}");
        assert!(diag.tail_bound <= 1e-12);
    }
}

#[test]
fn closed_matches_high_precision_oracle() {
    for &(alpha, lambda, delta, x, y, want) in &SERIES_ORACLES {
        let p = BRParams::pure(alpha, lambda, delta).unwrap().with_tol(1e-11);
        let k = br_kernel_closed(&pt(x.0, x.1), &pt(y.0, y.1), &p).unwrap();
        let want = Complex64::new(want.0, want.1);
        assert!((k.total - want).norm() < 1e-9, "alpha = {alpha}: {} vs {want}", k.total);
        assert_eq!(k.total, k.geometric + k.diffractive);
    }
}

#[test]
fn free_kernel_anchors() {
    for &delta in &[0.0, 0.5, 1.0, 2.0] {
        assert!((free_br_kernel(0.0, 1.0, delta) - PI / (1.0 + delta)).abs() < 1e-12);
        assert!((br_profile(0.0, 1.0, delta) - 0.5 / (1.0 + delta)).abs() < 1e-15);
    }
    assert!((br_profile(1.0, 1.0, 0.0) - 0.44005058574493352).abs() < 1e-13);
    assert!((free_br_kernel(1.0, 1.0, 0.0) - 2.0 * PI * 0.44005058574493352).abs() < 1e-12);
}

#[test]
fn spectral_profile_oracle() {
    let r = ab_riesz::quadrature::spectral_profile(1.3, 0.7, 1.1, 3.0, 0.5, 1e-13).unwrap();
    assert!((r.value - 0.52628816176834097).abs() < 1e-11);
}
