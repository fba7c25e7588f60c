use std::f64::consts::PI;

use ab_riesz::quadrature::*;
use num_complex::Complex64;

#[test]
fn finite_interval_anchors() {
    let r = integrate_adaptive(|_| 1.0, 0.0, 1.0, 1e-12).unwrap();
    assert!((r.value - 1.0).abs() < 1e-14);
    let r = integrate_adaptive(f64::sin, 0.0, PI, 1e-12).unwrap();
    assert!((r.value - 2.0).abs() < 1e-12);
    let r = integrate_adaptive(|x| x.powf(-0.5), 0.0, 1.0, 1e-10).unwrap();
    assert!((r.value - 2.0).abs() < 1e-9);
}

#[test]
fn tolerance_honesty_on_power_family() {
    for &gamma in &[-0.5, 0.0, 0.5, 2.0] {
        for &tol in &[1e-6, 1e-9, 1e-12] {
            let r = integrate_adaptive(|x| x.powf(gamma), 0.0, 1.0, tol).unwrap();
            let actual = (r.value - 1.0 / (gamma + 1.0)).abs();
            assert!(r.error_estimate >= actual, "gamma = {gamma}, tol = {tol}: estimate {} < actual {actual}", r.error_estimate);
            assert!(actual <= tol * (1.0 + r.value.abs()));
        }
    }
}

#[test]
fn breakpoints_and_complex_integrands() {
    let r = integrate_points(|x| x.abs(), &[-1.0, 0.0, 1.0], &QuadOptions::mixed(1e-12)).unwrap();
    assert!((r.value - 1.0).abs() < 1e-13);
    let r = integrate_complex(|x| Complex64::from_polar(1.0, x), &[0.0, PI], &QuadOptions::mixed(1e-12)).unwrap();
    assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    let r = integrate_vector(
        |x, out| {
            out[0] = x;
            out[1] = x * x;
        },
        2,
        &[0.0, 1.0],
        &QuadOptions::mixed(1e-12),
    )
    .unwrap();
    assert!((r.value[0] - 0.5).abs() < 1e-14 && (r.value[1] - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn invalid_breakpoints_are_rejected() {
    assert!(integrate_points(|x| x, &[1.0, 0.0], &QuadOptions::mixed(1e-9)).is_err());
    assert!(integrate_points(|x| x, &[0.0], &QuadOptions::mixed(1e-9)).is_err());
    assert!(integrate_points(|x| x, &[0.0, f64::INFINITY], &QuadOptions::mixed(1e-9)).is_err());
}

#[test]
fn non_finite_integrand_is_an_error() {
    assert!(integrate_adaptive(|x| 1.0 / (x - 0.5), 0.0, 1.0, 1e-9).is_err());
}

#[test]
fn semi_infinite_anchors() {
    let r = integrate_semi_infinite(|s| (-s).exp(), 1.0, 1e-12).unwrap();
    assert!((r.value - 1.0).abs() < 1e-11);
    let r = integrate_semi_infinite(|s| (-s).exp() * s.cos(), 1.0, 1e-12).unwrap();
    assert!((r.value - 0.5).abs() < 1e-11);
    // mpmath reference
    let r = integrate_semi_infinite(|s| (-0.5 * s).exp() / (s.cosh() + 1.0), 0.5, 1e-12).unwrap();
    assert!((r.value - 0.57079632679489662).abs() < 1e-11);
    let tight = integrate_semi_infinite(|s| (-0.5 * s).exp() / (s.cosh() + 1.0), 0.5, 1e-13).unwrap();
    assert!((r.value - tight.value).abs() <= r.error_estimate.max(1e-12));
}

#[test]
fn semi_infinite_rejects_violated_decay() {
    assert!(integrate_semi_infinite(|s| (-0.1 * s).exp(), 2.0, 1e-10).is_err());
    assert!(integrate_semi_infinite(|s| (-s).exp(), 0.0, 1e-10).is_err());
}

#[test]
fn half_line_algebraic_decay() {
    let r = integrate_half_line(|t| Complex64::new(1.0 / (1.0 + t * t), 0.0), 1.0, &QuadOptions::mixed(1e-11)).unwrap();
    assert!((r.value.re - PI / 2.0).abs() < 1e-10);
}

#[test]
fn spectral_profile_anchors() {
    let r = spectral_profile(0.0, 0.0, 0.0, 1.0, 0.0, 1e-12).unwrap();
    assert!((r.value - 0.5).abs() < 1e-12);
    let r = spectral_profile(0.0, 0.0, 0.0, 1.0, 1.0, 1e-12).unwrap();
    assert!((r.value - 0.25).abs() < 1e-12);
    let r = spectral_profile(1.0, 1.3, 0.0, 2.0, 0.5, 1e-12).unwrap();
    assert_eq!(r.value, 0.0);
    assert!(spectral_profile(0.0, 1.0, 1.0, 0.0, 0.0, 1e-9).is_err());
    assert!(spectral_profile(0.0, 1.0, 1.0, 1.0, -0.5, 1e-9).is_err());
}

#[test]
fn spectral_profile_diagonal_is_nonnegative() {
    for &nu in &[0.0, 0.3, 0.5, 2.7, 11.0] {
        for &r in &[0.05, 0.7, 2.0, 5.0] {
            for &lambda in &[1.0, 4.0, 16.0] {
                let v = spectral_profile(nu, r, r, lambda, 0.0, 1e-10).unwrap().value;
                assert!(v >= -1e-10, "nu = {nu}, r = {r}, lambda = {lambda}: {v}");
            }
        }
    }
}

#[test]
fn van_der_corput_decay() {
    let lambdas = [4.0, 16.0, 64.0, 256.0];
    let mags: Vec<f64> =
        lambdas.iter().map(|&l| oscillatory_integral(|s| s * s, |_| 1.0, 0.0, 1.0, l, 2.0, 1e-12).unwrap().value.norm()).collect();
    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = mags.iter().map(|m| m.ln()).collect();
    let slope = ab_riesz::operator_lab::fit_slope(&xs, &ys).unwrap();
    assert!((slope + 0.5).abs() <= 0.1, "slope {slope}, magnitudes {mags:?}");
    for (&l, &m) in lambdas.iter().zip(&mags) {
        let ratio = m * l.sqrt();
        assert!((0.5..=2.0).contains(&(ratio / (PI / 4.0).sqrt())), "lambda = {l}: {ratio}");
    }
}

#[test]
fn gauss_rules_integrate_polynomials_exactly() {
    let (x, w) = gauss_legendre(8);
    let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
    assert!((s - 2.0 / 15.0).abs() < 1e-14);
    // int_{-1}^{1} (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)
    let (a, b) = (0.5, 1.0);
    let (_, w) = gauss_jacobi(12, a, b);
    let total: f64 = w.iter().sum();
    let beta = ab_riesz::specfun::gamma(a + 1.0).unwrap() * ab_riesz::specfun::gamma(b + 1.0).unwrap()
        / ab_riesz::specfun::gamma(a + b + 2.0).unwrap();
    assert!((total - 2f64.powf(a + b + 1.0) * beta).abs() < 1e-13);
}
