use std::f64::consts::{PI, TAU};

use ab_riesz::ab_model::*;
use ab_riesz::kernels::*;
use num_complex::Complex64;
use proptest::prelude::*;

const ALPHAS: [f64; 4] = [0.3, 0.5, -0.7, 1.25];
const DELTAS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

fn pt(r: f64, t: f64) -> PolarPoint {
    PolarPoint::new(r, t).unwrap()
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(40))]

    #[test]
    fn br_kernel_is_hermitian(
        ai in 0..4usize, di in 0..4usize, lambda in 1.0..8.0f64,
        r1 in 0.05..3.0f64, r2 in 0.05..3.0f64, t1 in 0.0..TAU, t2 in 0.0..TAU,
    ) {
        let p = BRParams::pure(ALPHAS[ai], lambda, DELTAS[di]).unwrap().with_tol(1e-11);
        let (x, y) = (pt(r1, t1), pt(r2, t2));
        let kxy = br_kernel_closed(&x, &y, &p).unwrap().total;
        let kyx = br_kernel_closed(&y, &x, &p).unwrap().total;
        prop_assert!(close(kxy, kyx.conj(), 1e-9), "{kxy} vs {kyx}");
        let (sxy, _) = br_kernel_series(&x, &y, &p).unwrap();
        let (syx, _) = br_kernel_series(&y, &x, &p).unwrap();
        prop_assert!(close(sxy, syx.conj(), 1e-9));
    }

    #[test]
    fn spectral_and_resolvent_kernels_are_hermitian(
        ai in 0..4usize, rho in 0.5..4.0f64,
        r1 in 0.05..3.0f64, r2 in 0.05..3.0f64, t1 in 0.0..TAU, t2 in 0.0..TAU,
    ) {
        let alpha = ALPHAS[ai];
        let (flux, pot) = (FluxParameter::new(alpha), AngularPotential::pure(alpha));
        let (x, y) = (pt(r1, t1), pt(r2, t2));
        prop_assume!(distance_d(&x, &y) > 1e-3);
        let exy = spectral_measure_kernel(rho, &x, &y, &flux, &pot, 1e-11).unwrap();
        let eyx = spectral_measure_kernel(rho, &y, &x, &flux, &pot, 1e-11).unwrap();
        prop_assert!(close(exy, eyx.conj(), 1e-9), "{exy} vs {eyx}");
        // R(z)^* = R(conj z)
        let out = resolvent_kernel(rho, ResolventSign::Outgoing, &x, &y, &flux, &pot, 1e-11).unwrap();
        let inc = resolvent_kernel(rho, ResolventSign::Incoming, &y, &x, &flux, &pot, 1e-11).unwrap();
        prop_assert!(close(out, inc.conj(), 1e-9), "{out} vs {inc}");
    }

    #[test]
    fn br_kernel_is_rotation_invariant(
        ai in 0..4usize, di in 0..4usize, lambda in 1.0..8.0f64,
        r1 in 0.05..3.0f64, r2 in 0.05..3.0f64, t1 in 0.0..TAU, t2 in 0.0..TAU, c in 0.0..TAU,
    ) {
        let p = BRParams::pure(ALPHAS[ai], lambda, DELTAS[di]).unwrap().with_tol(1e-12);
        let k = br_kernel_closed(&pt(r1, t1), &pt(r2, t2), &p).unwrap().total;
        let kr = br_kernel_closed(&pt(r1, t1 + c), &pt(r2, t2 + c), &p).unwrap().total;
        prop_assert!(close(k, kr, 1e-10), "{k} vs {kr}");
    }

    #[test]
    fn gauge_shift_multiplies_by_phase(
        ai in 0..4usize, di in 0..4usize, lambda in 1.0..8.0f64,
        r1 in 0.05..3.0f64, r2 in 0.05..3.0f64, t1 in 0.0..TAU, t2 in 0.0..TAU,
    ) {
        let alpha = ALPHAS[ai];
        let p0 = BRParams::pure(alpha, lambda, DELTAS[di]).unwrap().with_tol(1e-11);
        let p1 = BRParams::pure(alpha + 1.0, lambda, DELTAS[di]).unwrap().with_tol(1e-11);
        let (x, y) = (pt(r1, t1), pt(r2, t2));
        let phase = Complex64::from_polar(1.0, -(x.theta - y.theta));
        let (s0, _) = br_kernel_series(&x, &y, &p0).unwrap();
        let (s1, _) = br_kernel_series(&x, &y, &p1).unwrap();
        prop_assert!(close(s1, phase * s0, 1e-8), "{s1} vs {}", phase * s0);
        let c0 = br_kernel_closed(&x, &y, &p0).unwrap().total;
        let c1 = br_kernel_closed(&x, &y, &p1).unwrap().total;
        prop_assert!(close(c1, phase * c0, 1e-8));
    }

    #[test]
    fn br_kernel_scales_with_lambda(
        ai in 0..4usize, di in 0..4usize, lambda in 1.0..6.0f64,
        r1 in 0.05..2.0f64, r2 in 0.05..2.0f64, t1 in 0.0..TAU, t2 in 0.0..TAU,
    ) {
        let p = BRParams::pure(ALPHAS[ai], lambda, DELTAS[di]).unwrap().with_tol(1e-12);
        let p1 = p.with_lambda(1.0).unwrap();
        let k = br_kernel_closed(&pt(r1, t1), &pt(r2, t2), &p).unwrap().total;
        let k1 = br_kernel_closed(&pt(lambda * r1, t1), &pt(lambda * r2, t2), &p1).unwrap().total;
        prop_assert!((k - lambda * lambda * k1).norm() <= 1e-8 * k.norm().max(1e-3), "{k} vs {}", lambda * lambda * k1);
    }

    #[test]
    fn diagonal_is_real_and_nonnegative(
        ai in 0..4usize, di in 0..4usize, lambda in 1.0..8.0f64, r in 0.05..3.0f64, t in 0.0..TAU,
    ) {
        let p = BRParams::pure(ALPHAS[ai], lambda, DELTAS[di]).unwrap();
        let x = pt(r, t);
        let k = br_kernel_closed(&x, &x, &p).unwrap().total;
        prop_assert!(k.im.abs() <= 1e-9 * k.re.abs().max(1.0), "{k}");
        prop_assert!(k.re >= -1e-9);
        let (s, _) = br_kernel_series(&x, &x, &p).unwrap();
        prop_assert!(s.im.abs() <= 1e-9 * s.re.abs().max(1.0) && s.re >= -1e-9, "{s}");
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn weights_are_conjugate_under_flux_reversal(
        alpha in -0.49..0.49f64, t1 in 0.0..TAU, t2 in 0.0..TAU, s in 0.0..20.0f64,
    ) {
        let (f, fm) = (FluxParameter::new(alpha), FluxParameter::new(-alpha));
        let (pot, potm) = (AngularPotential::pure(alpha), AngularPotential::pure(-alpha));
        let a = a_factor(t1, t2, &f, &pot);
        let am = a_factor(t1, t2, &fm, &potm);
        prop_assert!((a - am.conj()).norm() <= 1e-15);
        let b = b_factor(s, t1, t2, &f, &pot);
        let bm = b_factor(s, t1, t2, &fm, &potm);
        prop_assert!((b - bm.conj()).norm() <= 1e-14 * (1.0 + b.norm()), "{b} vs {bm}");
    }

    #[test]
    fn hyperbolic_distance_dominates(
        r1 in 0.01..10.0f64, r2 in 0.01..10.0f64, t1 in 0.0..TAU, t2 in 0.0..TAU, s in 0.0..50.0f64,
    ) {
        let (x, y) = (pt(r1, t1), pt(r2, t2));
        prop_assert!(distance_ds(s, &x, &y) >= distance_d(&x, &y) * (1.0 - 1e-15));
        prop_assert!(distance_ds(s, &x, &y) >= r1 + r2 - 1e-12);
    }

    #[test]
    fn distance_derivative_matches_finite_difference(
        r1 in 0.2..3.0f64, r2 in 0.2..3.0f64, t in -3.0..3.0f64,
    ) {
        let d = |t: f64| ab_riesz::dyadic_bounds::distance(r1, r2, t);
        prop_assume!(d(t) > 0.1 * r1.max(r2));
        let h = 1e-4;
        let fd = (8.0 * (d(t + h) - d(t - h)) - (d(t + 2.0 * h) - d(t - 2.0 * h))) / (12.0 * h);
        let exact = r1 * r2 * t.sin() / d(t);
        prop_assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1e-3 * r1.min(r2)), "{exact} vs {fd}");
    }

    #[test]
    fn a_factor_is_unimodular_up_to_normalization(alpha in -3.0..3.0f64, t1 in 0.0..TAU, t2 in 0.0..TAU) {
        let a = a_factor(t1, t2, &FluxParameter::new(alpha), &AngularPotential::pure(alpha));
        let dt = (t1 - t2).abs();
        prop_assume!((dt - PI).abs() > 1e-12);
        prop_assert!((a.norm() * 4.0 * PI * PI - 1.0).abs() < 1e-14);
    }
}
