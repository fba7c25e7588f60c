//! Data of the planar Aharonov-Bohm operator `-(nabla + i A(x/|x|)/|x|)^2`:
//! angular potential and flux, angular eigenpairs, the Euclidean and
//! diffractive distances, and the magnetic weights of the geometric and
//! diffractive kernel terms.
//!
//! The operator's angular eigenfunctions are the complex conjugates of
//! [`eigenfunction`], so a spectral kernel reads
//! `sum_k conj(phi_k(theta1)) phi_k(theta2) m_k(r1, r2)`. With this orientation
//! `K_{alpha+1}(x, y) = e^{-i(theta1 - theta2)} K_alpha(x, y)` for the pure
//! potential, and both weights carry the phase `e^{i int_{theta1}^{theta2} A}`.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::quadrature::{self, QuadError, QuadOptions};
use crate::specfun::sin_pi;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid polar point: {0}")]
    Point(String),
    #[error("invalid potential table: {0}")]
    Potential(String),
    #[error("B-weight integral did not converge at dtheta = {dtheta}: {source}")]
    Integral { dtheta: f64, source: QuadError },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Angular part `A(theta)` of the vector potential.
#[derive(Debug, Clone, PartialEq)]
pub enum AngularPotential {
    /// Constant `A = alpha`.
    PureAb { alpha: f64 },
    /// Samples on `theta_k = 2 pi k / n`, trigonometrically interpolated.
    Tabulated(TabulatedPotential),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPotential {
    samples: Vec<f64>,
    mean: f64,
    // A(theta) = mean + sum_k (cos_coef[k] cos(k theta) + sin_coef[k] sin(k theta)), k >= 1
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
}

impl TabulatedPotential {
    /// Builds the interpolant from samples on the uniform grid `2 pi k / n`.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self, ModelError> {
        let n = samples.len();
        if n < 2 {
            return Err(ModelError::Potential(format!("need at least 2 samples, got {n}")));
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(ModelError::Potential(format!("non-finite sample {bad}")));
        }
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let nf = n as f64;
        let mean = buf[0].re / nf;
        let kmax = n / 2;
        let mut cos_coef = vec![0.0; kmax + 1];
        let mut sin_coef = vec![0.0; kmax + 1];
        for k in 1..=kmax {
            let c = buf[k] / nf;
            if 2 * k == n {
                cos_coef[k] = c.re;
            } else {
                cos_coef[k] = 2.0 * c.re;
                sin_coef[k] = -2.0 * c.im;
            }
        }
        Ok(Self { samples, mean, cos_coef, sin_coef })
    }

    /// Reads two delimited columns `theta, A(theta)` (comma, semicolon or
    /// whitespace separated; `#` starts a comment). The angles must be the
    /// uniform grid `2 pi k / n` to within `1e-9`.
    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|e| ModelError::Potential(format!("{}: {e}", path.display())))?;
        let mut thetas = Vec::new();
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(|c: char| c == ',' || c == ';' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if fields.len() != 2 {
                return Err(ModelError::Potential(format!("line {}: expected 2 columns, found {}", lineno + 1, fields.len())));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| ModelError::Potential(format!("line {}: {e}", lineno + 1)));
            thetas.push(parse(fields[0])?);
            values.push(parse(fields[1])?);
        }
        let n = thetas.len();
        for (k, t) in thetas.iter().enumerate() {
            let expect = TAU * k as f64 / n as f64;
            if (t - expect).abs() > 1e-9 {
                return Err(ModelError::Potential(format!("row {k}: theta = {t} is not on the uniform grid (expected {expect})")));
            }
        }
        Self::from_samples(values)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    fn value(&self, theta: f64) -> f64 {
        let mut v = self.mean;
        for k in 1..self.cos_coef.len() {
            let (s, c) = (k as f64 * theta).sin_cos();
            v += self.cos_coef[k] * c + self.sin_coef[k] * s;
        }
        v
    }

    fn primitive(&self, theta: f64) -> f64 {
        let mut v = self.mean * theta;
        for k in 1..self.cos_coef.len() {
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            v += self.cos_coef[k] * s / kf + self.sin_coef[k] * (1.0 - c) / kf;
        }
        v
    }
}

impl AngularPotential {
    pub fn pure(alpha: f64) -> Self {
        Self::PureAb { alpha }
    }

    pub fn value(&self, theta: f64) -> f64 {
        match self {
            Self::PureAb { alpha } => *alpha,
            Self::Tabulated(t) => t.value(theta),
        }
    }

    /// `int_0^theta A`.
    pub fn primitive(&self, theta: f64) -> f64 {
        match self {
            Self::PureAb { alpha } => alpha * theta,
            Self::Tabulated(t) => t.primitive(theta),
        }
    }

    /// The potential `-A`.
    pub fn negated(&self) -> Self {
        match self {
            Self::PureAb { alpha } => Self::PureAb { alpha: -alpha },
            Self::Tabulated(t) => Self::Tabulated(TabulatedPotential {
                samples: t.samples.iter().map(|v| -v).collect(),
                mean: -t.mean,
                cos_coef: t.cos_coef.iter().map(|v| -v).collect(),
                sin_coef: t.sin_coef.iter().map(|v| -v).collect(),
            }),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Self::PureAb { .. })
    }

    /// `e^{i(int_0^theta A - alpha_0 theta)}`; the gauge factor relating this
    /// potential to the pure potential with the reduced flux.
    pub fn gauge_factor(&self, theta: f64) -> Complex64 {
        let fl = FluxParameter::new(flux(self));
        match self {
            Self::PureAb { .. } => Complex64::from_polar(1.0, fl.m as f64 * theta),
            Self::Tabulated(_) => Complex64::from_polar(1.0, self.primitive(theta) - fl.alpha0 * theta),
        }
    }
}

/// Total flux `alpha = alpha_total = m + alpha0` with `alpha0` in `(-1/2, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FluxParameter {
    pub alpha_total: f64,
    pub m: i64,
    pub alpha0: f64,
}

impl FluxParameter {
    pub fn new(alpha_total: f64) -> Self {
        let m = (alpha_total - 0.5).ceil();
        Self { alpha_total, m: m as i64, alpha0: alpha_total - m }
    }

    pub fn is_integer(&self) -> bool {
        self.alpha0 == 0.0
    }
}

/// Mean of `A` over the circle.
pub fn flux(potential: &AngularPotential) -> f64 {
    match potential {
        AngularPotential::PureAb { alpha } => *alpha,
        AngularPotential::Tabulated(t) => t.mean,
    }
}

/// `nu_k = |k + alpha|`.
pub fn eigen_nu(k: i64, alpha: f64) -> f64 {
    (k as f64 + alpha).abs()
}

/// `(2 pi)^{-1/2} e^{-i(theta (k + alpha) - int_0^theta A)}`.
pub fn eigenfunction(k: i64, theta: f64, potential: &AngularPotential) -> Complex64 {
    let norm = 1.0 / TAU.sqrt();
    let phase = match potential {
        AngularPotential::PureAb { .. } => -(k as f64) * theta,
        AngularPotential::Tabulated(_) => -(theta * (k as f64 + flux(potential)) - potential.primitive(theta)),
    };
    Complex64::from_polar(norm, phase)
}

/// Point `r (cos theta, sin theta)` with `r > 0` and `theta` in `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Result<Self, ModelError> {
        if !(r > 0.0) || !r.is_finite() || !theta.is_finite() {
            return Err(ModelError::Point(format!("r = {r}, theta = {theta}: need finite r > 0")));
        }
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        Ok(Self { r, theta: t })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { r: self.r * c, theta: self.theta }
    }
}

/// `|x - y|` from polar data, `sqrt((r1 - r2)^2 + 4 r1 r2 sin^2(dtheta/2))`.
pub fn distance_d(x: &PolarPoint, y: &PolarPoint) -> f64 {
    distance_from_radii(x.r, y.r, x.theta - y.theta)
}

pub(crate) fn distance_from_radii(r1: f64, r2: f64, dtheta: f64) -> f64 {
    let s = (0.5 * dtheta).sin();
    let dr = r1 - r2;
    (dr * dr + 4.0 * r1 * r2 * s * s).max(0.0).sqrt()
}

/// `|n_s| = sqrt(r1^2 + r2^2 + 2 r1 r2 cosh s)`.
pub fn distance_ds(s: f64, x: &PolarPoint, y: &PolarPoint) -> f64 {
    ds_from_radii(s, x.r, y.r)
}

pub(crate) fn ds_from_radii(s: f64, r1: f64, r2: f64) -> f64 {
    if s > 40.0 {
        let p = r1 * r2;
        let e = (-s).exp();
        return p.sqrt() * (0.5 * s).exp() * (1.0 + e * e + (r1 * r1 + r2 * r2) / p * e).sqrt();
    }
    let sh = (0.5 * s).sinh();
    let sum = r1 + r2;
    (sum * sum + 4.0 * r1 * r2 * sh * sh).sqrt()
}

/// `b = sqrt(2) sin((dtheta + pi)/2)`.
/// Exactly zero at `|dtheta| = pi`, where the one-sided limits are averaged.
pub fn b_parameter(dtheta: f64) -> f64 {
    if dtheta.abs() == PI {
        return 0.0;
    }
    2f64.sqrt() * (0.5 * (dtheta + PI)).sin()
}

/// Breakpoints `|b| 4^k` below `min(upper, 1)` resolving the Lorentzian
/// `b / (s^2/2 + b^2)` of the diffractive weight across all scales.
pub(crate) fn lorentzian_breakpoints(b: f64, upper: f64) -> Vec<f64> {
    let b = b.abs();
    let top = upper.min(1.0);
    let mut pts = Vec::new();
    let mut v = b;
    while v > 0.0 && v < top {
        pts.push(v);
        v *= 4.0;
    }
    pts
}

/// Distances attached to a pair of points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFactors {
    pub r1: f64,
    pub r2: f64,
    pub d: f64,
    pub b: f64,
}

impl GeometricFactors {
    pub fn new(x: &PolarPoint, y: &PolarPoint) -> Self {
        Self { r1: x.r, r2: y.r, d: distance_d(x, y), b: b_parameter(x.theta - y.theta) }
    }

    pub fn d_s(&self, s: f64) -> f64 {
        ds_from_radii(s, self.r1, self.r2)
    }
}

/// The two weights evaluated at a fixed pair of angles.
#[derive(Debug, Clone, PartialEq)]
pub struct MagneticFactors {
    pub a_weight: Complex64,
    pub b_weight: BWeight,
}

impl MagneticFactors {
    pub fn new(theta1: f64, theta2: f64, flux: &FluxParameter, potential: &AngularPotential) -> Self {
        Self { a_weight: a_factor(theta1, theta2, flux, potential), b_weight: BWeight::new(theta1, theta2, flux, potential) }
    }
}

/// `e^{i int_{theta1}^{theta2} A}`; the primitive is used without wrap-around.
fn line_phase(theta1: f64, theta2: f64, potential: &AngularPotential) -> Complex64 {
    Complex64::from_polar(1.0, potential.primitive(theta2) - potential.primitive(theta1))
}

/// Geometric weight
/// `(e^{i int_{theta1}^{theta2} A} / 4 pi^2) (1_{|dtheta| < pi} + e^{2 pi i alpha} 1_{(pi, 2pi)}(dtheta) + e^{-2 pi i alpha} 1_{(-2pi, -pi)}(dtheta))`,
/// `dtheta = theta1 - theta2`; at `|dtheta| = pi` the two one-sided values are averaged.
pub fn a_factor(theta1: f64, theta2: f64, flux: &FluxParameter, potential: &AngularPotential) -> Complex64 {
    let dt = theta1 - theta2;
    let wind = Complex64::from_polar(1.0, TAU * flux.alpha0);
    let one = Complex64::new(1.0, 0.0);
    let ind = if dt.abs() < PI {
        one
    } else if dt == PI {
        0.5 * (one + wind)
    } else if dt == -PI {
        0.5 * (one + wind.conj())
    } else if dt > 0.0 {
        wind
    } else {
        wind.conj()
    };
    line_phase(theta1, theta2, potential) * ind / (4.0 * PI * PI)
}

/// Diffractive weight `s -> B(s)` at fixed angles. For the pure potential at
/// reduced flux `a`:
/// `B = -(1/4 pi^2)(sin(|a| pi) e^{-|a| s} + sin(a pi) [(e^{-s} - cos phi) sinh(a s) + i sin phi cosh(a s)] / (cosh s - cos phi))`,
/// `phi = dtheta + pi`, multiplied by the gauge phase `e^{i int_{theta1}^{theta2} A + i alpha0 dtheta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BWeight {
    a: f64,
    sin_abs: f64,
    sin_a: f64,
    b: f64,
    cos_half: f64,
    prefactor: Complex64,
}

impl BWeight {
    pub fn new(theta1: f64, theta2: f64, flux: &FluxParameter, potential: &AngularPotential) -> Self {
        let dt = theta1 - theta2;
        let a = flux.alpha0;
        let phi_half = 0.5 * (dt + PI);
        let prefactor = if flux.is_integer() {
            Complex64::new(0.0, 0.0)
        } else {
            line_phase(theta1, theta2, potential) * Complex64::from_polar(1.0, a * dt) / (4.0 * PI * PI)
        };
        Self { a, sin_abs: sin_pi(a.abs()), sin_a: sin_pi(a), b: b_parameter(dt), cos_half: phi_half.cos(), prefactor }
    }

    pub fn vanishes(&self) -> bool {
        self.prefactor == Complex64::new(0.0, 0.0)
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Exponential decay rate of `|B(s)|`.
    pub fn decay_rate(&self) -> f64 {
        self.a.abs()
    }

    /// `B(s)` for real `s >= 0`.
    pub fn eval(&self, s: f64) -> Complex64 {
        if self.vanishes() {
            return Complex64::new(0.0, 0.0);
        }
        let [p0, p2, p3] = self.parts(s);
        let bracket = Complex64::new(self.sin_abs * p0, 0.0) + self.sin_a * p2;
        -self.prefactor * (bracket + Complex64::new(0.0, self.sin_a) * p3)
    }

    /// `B` continued to complex `s`, given `e^{-s}` and `cosh s - cos phi`.
    pub(crate) fn eval_complex(&self, s: Complex64, exp_neg_s: Complex64, den: Complex64) -> Complex64 {
        if self.vanishes() {
            return Complex64::new(0.0, 0.0);
        }
        let [p0, p2, p3] = self.parts_complex(s, exp_neg_s, den);
        -self.prefactor * (self.sin_abs * p0 + self.sin_a * (p2 + Complex64::i() * p3))
    }

    /// Flux prefactors `(sin(|a| pi), sin(a pi))`.
    pub(crate) fn sines(&self) -> (f64, f64) {
        (self.sin_abs, self.sin_a)
    }

    /// Bracket parts without flux prefactors: `e^{-|a|s}`,
    /// `(e^{-s} - cos phi) sinh(a s)/(cosh s - cos phi)` and
    /// `sin phi cosh(a s)/(cosh s - cos phi)`.
    pub(crate) fn parts(&self, s: f64) -> [f64; 3] {
        let a = self.a;
        let b2 = self.b * self.b;
        let sin_phi = 2f64.sqrt() * self.b * self.cos_half;
        let p0 = (-a.abs() * s).exp();
        if s * s + b2 < 1e-8 {
            // second-order expansion around s = b = 0
            let den = 0.5 * s * s * (1.0 + s * s / 12.0) + b2;
            if den == 0.0 {
                return [p0, -2.0 * a, 0.0];
            }
            let re = a * s * (-s + 0.5 * s * s + b2) * (1.0 + a * a * s * s / 6.0);
            let im = sin_phi * (1.0 + 0.5 * a * a * s * s);
            [p0, re / den, im / den]
        } else {
            let sh = (0.5 * s).sinh();
            let den = 2.0 * sh * sh + b2;
            let re = ((-s).exp_m1() + b2) * (a * s).sinh();
            let im = sin_phi * (a * s).cosh();
            [p0, re / den, im / den]
        }
    }

    /// [`BWeight::parts`] continued to complex `s`.
    pub(crate) fn parts_complex(&self, s: Complex64, exp_neg_s: Complex64, den: Complex64) -> [Complex64; 3] {
        let a = self.a;
        let cos_phi = 1.0 - self.b * self.b;
        let sin_phi = 2f64.sqrt() * self.b * self.cos_half;
        let ep = (a * s).exp();
        let em = ep.inv();
        let sinh = 0.5 * (ep - em);
        let cosh = 0.5 * (ep + em);
        [(-a.abs() * s).exp(), (exp_neg_s - cos_phi) * sinh / den, sin_phi * cosh / den]
    }
}

/// `B(s)` at a single point.
pub fn b_factor(s: f64, theta1: f64, theta2: f64, flux: &FluxParameter, potential: &AngularPotential) -> Complex64 {
    BWeight::new(theta1, theta2, flux, potential).eval(s)
}

/// `sup_{dtheta in grid} int_0^inf |B(s; dtheta)| ds` for the pure potential.
pub fn b_integral_check(theta_grid: &[f64], flux: &FluxParameter) -> Result<f64, ModelError> {
    if flux.is_integer() {
        return Ok(0.0);
    }
    let pot = AngularPotential::pure(flux.alpha_total);
    let mut sup: f64 = 0.0;
    for &dt in theta_grid {
        let w = BWeight::new(dt, 0.0, flux, &pot);
        let mut brk = lorentzian_breakpoints(w.b(), 1.0);
        brk.push(1.0);
        let r = quadrature::integrate_semi_infinite_complex(
            |s| Complex64::new(w.eval(s).norm(), 0.0),
            w.decay_rate(),
            &brk,
            &QuadOptions::new(1e-10, 1e-10),
        )
        .map_err(|e| ModelError::Integral { dtheta: dt, source: e })?;
        sup = sup.max(r.value.re);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flux_decomposition() {
        for &(a, m, a0) in &[(0.5, 0, 0.5), (-0.5, -1, 0.5), (1.25, 1, 0.25), (-0.7, -1, 0.3), (2.0, 2, 0.0), (0.3, 0, 0.3)] {
            let f = FluxParameter::new(a);
            assert_eq!(f.m, m, "alpha = {a}");
            assert_relative_eq!(f.alpha0, a0, epsilon = 1e-15);
            assert_eq!(f.m as f64 + f.alpha0, a);
        }
    }

    #[test]
    fn tabulated_interpolant_is_exact_on_trig_polynomials() {
        let n = 32;
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let t = TAU * k as f64 / n as f64;
                0.3 + 0.1 * t.sin() + 0.05 * (3.0 * t).cos()
            })
            .collect();
        let t = TabulatedPotential::from_samples(samples).unwrap();
        for &th in &[0.1, 1.7, 4.0] {
            assert_relative_eq!(t.value(th), 0.3 + 0.1 * f64::sin(th) + 0.05 * f64::cos(3.0 * th), epsilon = 1e-14);
            let prim = 0.3 * th + 0.1 * (1.0 - f64::cos(th)) + 0.05 * f64::sin(3.0 * th) / 3.0;
            assert_relative_eq!(t.primitive(th), prim, epsilon = 1e-14);
        }
    }

    #[test]
    fn b_weight_small_branch_is_continuous() {
        let fl = FluxParameter::new(0.3);
        let pot = AngularPotential::pure(0.3);
        let w = BWeight::new(PI + 2e-5, 0.0, &fl, &pot);
        let b2 = w.b() * w.b();
        let s_edge = (1e-8 - b2).sqrt();
        let below = w.eval(s_edge * (1.0 - 1e-13));
        let above = w.eval(s_edge * (1.0 + 1e-13));
        assert!((below - above).norm() <= 1e-9 * below.norm(), "{below} vs {above}");
    }
}
