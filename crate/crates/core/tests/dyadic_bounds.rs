use std::f64::consts::PI;

use ab_riesz::ab_model::{FluxParameter, PolarPoint};
use ab_riesz::dyadic_bounds::*;

#[test]
fn partition_of_unity() {
    for k in 0..400 {
        let r = 0.01 * 1.03f64.powi(k);
        let total: f64 = (0..40).map(|j| partition(j, r)).sum();
        assert!((total - 1.0).abs() < 1e-12, "r = {r}: {total}");
    }
    assert_eq!(bump_chi(0.5), 1.0);
    assert_eq!(bump_chi(2.0), 0.0);
    assert_eq!(bump_beta(0.2), 0.0);
    assert_eq!(bump_beta(1.5), 0.0);
}

#[test]
fn piece_names_round_trip() {
    for (name, kind) in [("G", PieceKind::G), ("D1", PieceKind::D1), ("d2", PieceKind::D2), ("D3", PieceKind::D3)] {
        assert_eq!(name.parse::<PieceKind>().unwrap(), kind);
    }
    assert!("D4".parse::<PieceKind>().is_err());
    assert_eq!(PieceKind::from_ell(2).unwrap(), PieceKind::D2);
    assert!(PieceKind::from_ell(0).is_err());
}

#[test]
fn distance_derivatives_match_closed_forms() {
    for &(r1, r2, t) in &[(1.0, 0.5, 0.7), (2.5, 0.3, -2.0), (0.4, 1.9, 3.0)] {
        let d = distance(r1, r2, t);
        assert!((distance_dtheta(r1, r2, t).unwrap() - r1 * r2 * t.sin() / d).abs() < 1e-14);
    }
    let r = verify_derivatives(100, 0xAB01).unwrap();
    assert!(r.pass && r.sup_ratio <= 1e-6, "{}", r.sup_ratio);
}

#[test]
fn determinant_matches_finite_differences() {
    let r = verify_det(100, 0xAB01).unwrap();
    assert!(r.pass && r.sup_ratio <= 1e-5, "{}", r.sup_ratio);
    let other = verify_det(100, 7).unwrap();
    assert!(other.pass);
}

#[test]
fn d_bounds_flat_at_delta_zero() {
    let grid = DBoundGrid::default();
    let js: Vec<u32> = (2..=8).collect();
    for ell in [1u8, 2] {
        for &alpha in &[0.3, 0.5] {
            let s = d_bound_suite(ell, &js, alpha, 0.0, &grid).unwrap();
            assert_eq!(s.reports.len(), js.len());
            assert!(s.reports.iter().all(|r| r.pass && r.sup_ratio > 0.0));
            assert!(s.flatness <= ceilings::FLATNESS, "ell = {ell}, alpha = {alpha}: {}", s.flatness);
            assert!(s.pass);
        }
    }
}

#[test]
fn d_pieces_vanish_at_integer_flux() {
    let grid = DBoundGrid::default();
    for ell in [1u8, 2] {
        for &alpha in &[0.0, 1.0, -2.0] {
            let r = verify_d_bound(ell, 4, alpha, 0.5, &grid).unwrap();
            assert_eq!(r.sup_ratio, 0.0);
        }
    }
    let x = PolarPoint::new(3.0, 0.2).unwrap();
    let y = PolarPoint::new(2.0, 2.9).unwrap();
    let v = kernel_piece_d(1, 3, &x, &y, 0.5, &FluxParameter::new(1.0)).unwrap();
    assert_eq!(v.norm(), 0.0);
}

#[test]
fn g_piece_is_radial_in_the_distance() {
    let a = kernel_piece_g(3, &PolarPoint::new(5.0, 0.0).unwrap(), &PolarPoint::new(1.0, 0.0).unwrap(), 0.5);
    let b = kernel_piece_g(3, &PolarPoint::new(2.0, 1.0).unwrap(), &PolarPoint::new(2.0, 1.0 + 2.0 * (1.0f64).asin()).unwrap(), 0.5);
    assert!((a - b).norm() < 1e-10 * a.norm().max(1e-12));
}

#[test]
fn i_j_bound_holds() {
    let r = verify_ij_bound(&IjGrid::default()).unwrap();
    assert!(r.pass, "{}", r.sup_ratio);
    assert!(r.sup_ratio > 0.0 && r.sup_ratio <= ceilings::IJ);
}

#[test]
fn fourier_regimes_bounded() {
    let js: Vec<u32> = (2..=6).collect();
    let (low, high) = fourier_suite(&js, &default_ft_pairs(), &FtConfig::default()).unwrap();
    assert!(low.pass && high.pass, "low {}, high {}", low.sup_ratio, high.sup_ratio);
    assert!(low.sup_ratio > 0.0 && high.sup_ratio > 0.0);
}

#[test]
fn b_integrability_is_refinement_stable() {
    for &alpha in &[0.3, 0.5, -0.49] {
        let r = b_integral_suite(alpha, 24).unwrap();
        assert!(r.pass, "alpha = {alpha}: change {}", r.sup_ratio);
    }
    assert_eq!(b_integral_suite(1.0, 24).unwrap().sup_ratio, 0.0);
}

#[test]
fn near_antipodal_angles_stay_finite() {
    let flux = FluxParameter::new(0.5);
    for &dt in &[PI - 1e-3, PI, -(PI - 1e-2)] {
        let h = h_kernel(3, 0.6, 0.3, dt, 0.25, &flux).unwrap();
        assert!(h.re.is_finite() && h.im.is_finite());
    }
}
