//! Bochner-Riesz, spectral-measure and resolvent kernels.
//!
//! Every kernel has a closed form `c_G A(theta1, theta2) F(|x - y|) + c_D int_0^inf B(s) F(|n_s|) ds`
//! with a radial profile `F`, and a partial-wave oracle
//! `sum_k conj(phi_k(theta1)) phi_k(theta2) m(nu_k; r1, r2)`.
//!
//! The diffractive integral is split at `W = max(|n_1|, 30 / kappa)`: the head
//! `s < s(W)` is integrated along the real axis, the tail is rewritten in
//! `w = |n_s|` and each oscillating half `e^{+-i kappa w} g(w)` is integrated
//! along the vertical ray `W +- i t`, where it decays like `e^{-kappa t}`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::ab_model::{self, a_factor, AngularPotential, BWeight, FluxParameter, ModelError, PolarPoint};
use crate::quadrature::{self, QuadError, QuadOptions};
use crate::specfun::{self, SpecFunError};

/// Geometric and diffractive constants of the Bochner-Riesz kernel.
pub const BR_GEOMETRIC_CONSTANT: f64 = TAU;
pub const BR_DIFFRACTIVE_CONSTANT: f64 = 2.0;
/// Same constants for the spectral measure density (the kernel is `rho` times the bracket).
pub const SPECTRAL_GEOMETRIC_CONSTANT: f64 = TAU;
pub const SPECTRAL_DIFFRACTIVE_CONSTANT: f64 = 2.0;
/// Outgoing resolvent constants `i pi^2` and `i pi`.
pub const RESOLVENT_GEOMETRIC_CONSTANT: Complex64 = Complex64::new(0.0, PI * PI);
pub const RESOLVENT_DIFFRACTIVE_CONSTANT: Complex64 = Complex64::new(0.0, PI);

/// Largest partial-wave index the series oracles may reach.
pub const SERIES_K_CAP: usize = 2000;
/// Largest `lambda * max(r1, r2)` accepted by the series oracles.
pub const SERIES_RADIUS_CAP: f64 = 50.0;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("invalid kernel parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("partial-wave series did not converge: tail bound {tail_bound:e} at k_max = {k_max}")]
    Truncation { k_max: usize, tail_bound: f64 },
    #[error("lambda * max(r1, r2) = {0} exceeds the series cap {SERIES_RADIUS_CAP}")]
    RadiusCap(f64),
    #[error("resolvent kernel is singular on the diagonal x = y")]
    Diagonal,
}

/// Parameters shared by all Bochner-Riesz evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct BRParams {
    pub lambda: f64,
    pub delta: f64,
    pub flux: FluxParameter,
    pub potential: AngularPotential,
    pub tol: f64,
}

impl BRParams {
    pub fn new(lambda: f64, delta: f64, potential: AngularPotential, tol: f64) -> Result<Self, KernelError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(KernelError::Invalid(format!("lambda must be finite and > 0, got {lambda}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(KernelError::Invalid(format!("delta must be finite and >= 0, got {delta}")));
        }
        if !(tol > 0.0) {
            return Err(KernelError::Invalid(format!("tol must be > 0, got {tol}")));
        }
        let flux = FluxParameter::new(ab_model::flux(&potential));
        Ok(Self { lambda, delta, flux, potential, tol })
    }

    /// Pure Aharonov-Bohm potential with the default tolerance.
    pub fn pure(alpha: f64, lambda: f64, delta: f64) -> Result<Self, KernelError> {
        Self::new(lambda, delta, AngularPotential::pure(alpha), DEFAULT_TOL)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self, KernelError> {
        Self::new(lambda, self.delta, self.potential.clone(), self.tol)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Closed-form kernel split into its geometric and diffractive terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelDecomposition {
    pub geometric: Complex64,
    pub diffractive: Complex64,
    pub total: Complex64,
    pub error_estimate: f64,
}

impl KernelDecomposition {
    fn new(geometric: Complex64, diffractive: Complex64, error_estimate: f64) -> Self {
        Self { geometric, diffractive, total: geometric + diffractive, error_estimate }
    }
}

/// Truncation bookkeeping of a partial-wave sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDiagnostics {
    /// Largest `|k + m|` included, `m` the integer part of the flux.
    pub k_max_used: usize,
    /// Bound on the omitted terms.
    pub tail_bound: f64,
    /// `(k, |term|)` for every included index, when requested.
    pub terms: Option<Vec<(i64, f64)>>,
}

// ---------------------------------------------------------------------------
// radial profiles

/// `int_0^lambda (1 - rho^2/lambda^2)^delta J_0(rho d) rho d rho = lambda^2 2^delta Gamma(delta+1) J_{1+delta}(z)/z^{1+delta}`, `z = lambda d`.
pub fn br_profile(dist: f64, lambda: f64, delta: f64) -> f64 {
    let z = lambda * dist;
    let l2 = lambda * lambda;
    if z <= 2.0 {
        let q = -0.25 * z * z;
        let mut term = 1.0 / (delta + 1.0);
        let mut sum = term;
        for k in 1..60 {
            let kf = k as f64;
            term *= q / (kf * (kf + delta + 1.0));
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return 0.5 * l2 * sum;
    }
    let nu = 1.0 + delta;
    l2 * 2f64.powf(delta) * specfun::gamma_unchecked(delta + 1.0) * specfun::j_unchecked(nu, z).0 / z.powf(nu)
}

/// `lambda^2 K_1^delta(lambda dist)` with `K_1^delta(x) = int_{|xi| <= 1} (1 - |xi|^2)^delta e^{i x.xi} d xi`.
pub fn free_br_kernel(dist: f64, lambda: f64, delta: f64) -> f64 {
    TAU * br_profile(dist, lambda, delta)
}

/// Radial factor of a diffractive integral, with its analytic continuation
/// split as `e^{i kappa w} g_out(w) + e^{-i kappa w} g_in(w)`.
pub(crate) trait RadialProfile: Sync {
    fn kappa(&self) -> f64;
    fn real(&self, w: f64) -> Complex64;
    fn outgoing(&self, w: Complex64) -> Complex64;
    fn incoming(&self, w: Complex64) -> Complex64;
    fn has_incoming(&self) -> bool {
        true
    }
    /// Smallest contour abscissa at which the complex continuation is accurate.
    fn min_abscissa(&self) -> f64 {
        30.0 / self.kappa()
    }
}

struct BrRadial {
    lambda: f64,
    delta: f64,
    nu: f64,
    coef: f64,
}

impl BrRadial {
    fn new(lambda: f64, delta: f64) -> Self {
        let coef = lambda * lambda * 2f64.powf(delta) * specfun::gamma_unchecked(delta + 1.0);
        Self { lambda, delta, nu: 1.0 + delta, coef }
    }

    fn continued(&self, w: Complex64, outgoing: bool) -> Complex64 {
        let z = w * self.lambda;
        0.5 * self.coef * specfun::hankel_amplitude(self.nu, z, outgoing) / z.powf(self.nu)
    }
}

impl RadialProfile for BrRadial {
    fn kappa(&self) -> f64 {
        self.lambda
    }
    fn real(&self, w: f64) -> Complex64 {
        Complex64::new(br_profile(w, self.lambda, self.delta), 0.0)
    }
    fn outgoing(&self, w: Complex64) -> Complex64 {
        self.continued(w, true)
    }
    fn incoming(&self, w: Complex64) -> Complex64 {
        self.continued(w, false)
    }
}

struct J0Radial {
    rho: f64,
}

impl RadialProfile for J0Radial {
    fn kappa(&self) -> f64 {
        self.rho
    }
    fn real(&self, w: f64) -> Complex64 {
        Complex64::new(specfun::j_unchecked(0.0, self.rho * w).0, 0.0)
    }
    fn outgoing(&self, w: Complex64) -> Complex64 {
        0.5 * specfun::hankel_amplitude(0.0, w * self.rho, true)
    }
    fn incoming(&self, w: Complex64) -> Complex64 {
        0.5 * specfun::hankel_amplitude(0.0, w * self.rho, false)
    }
}

struct H0Radial {
    lambda: f64,
}

fn hankel1_0_unchecked(x: f64) -> Complex64 {
    Complex64::new(specfun::j_unchecked(0.0, x).0, specfun::y0_unchecked(x).0)
}

impl RadialProfile for H0Radial {
    fn kappa(&self) -> f64 {
        self.lambda
    }
    fn real(&self, w: f64) -> Complex64 {
        hankel1_0_unchecked(self.lambda * w)
    }
    fn outgoing(&self, w: Complex64) -> Complex64 {
        specfun::hankel_amplitude(0.0, w * self.lambda, true)
    }
    fn incoming(&self, _w: Complex64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn has_incoming(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// diffractive engine

/// Angular weight of a diffractive integral: a function of `s` with poles
/// only where `cosh s = cos phi`, `b = sqrt(2) sin(phi/2)`.
pub(crate) trait DiffractiveWeight: Sync {
    fn b(&self) -> f64;
    fn vanishes(&self) -> bool;
    fn real(&self, s: f64) -> Complex64;
    /// Value at complex `s`, given `e^{-s}` and `cosh s - cos phi`.
    fn complex(&self, s: Complex64, exp_neg_s: Complex64, den: Complex64) -> Complex64;
}

impl DiffractiveWeight for BWeight {
    fn b(&self) -> f64 {
        BWeight::b(self)
    }
    fn vanishes(&self) -> bool {
        BWeight::vanishes(self)
    }
    fn real(&self, s: f64) -> Complex64 {
        self.eval(s)
    }
    fn complex(&self, s: Complex64, exp_neg_s: Complex64, den: Complex64) -> Complex64 {
        self.eval_complex(s, exp_neg_s, den)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DiffractiveOutcome {
    pub values: Vec<Complex64>,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// `int_0^inf W_i(s) F(|n_s|) ds` for every weight in `weights` at once.
/// `tol` bounds the summed absolute error of all values.
pub(crate) fn diffractive_batch<W: DiffractiveWeight, P: RadialProfile>(
    weights: &[W],
    r1: f64,
    r2: f64,
    profile: &P,
    tol: f64,
) -> Result<DiffractiveOutcome, QuadError> {
    let zero = Complex64::new(0.0, 0.0);
    let active: Vec<usize> = (0..weights.len()).filter(|&i| !weights[i].vanishes()).collect();
    let mut values = vec![zero; weights.len()];
    if active.is_empty() {
        return Ok(DiffractiveOutcome { values, error_estimate: 0.0, evaluations: 0 });
    }
    let kappa = profile.kappa();
    let c = r1 + r2;
    let e = (r1 - r2).abs();
    let p2 = 2.0 * r1 * r2;
    let w_cut = ab_model::ds_from_radii(1.0, r1, r2).max(profile.min_abscissa());
    let s_of_w = |w: f64| 2.0 * ((w - c) * (w + c) / (2.0 * p2)).max(0.0).sqrt().asinh();
    let s_cut = s_of_w(w_cut);

    let mut pts = vec![0.0, s_cut];
    for &i in &active {
        pts.extend(ab_model::lorentzian_breakpoints(weights[i].b(), s_cut));
    }
    let period = TAU / kappa;
    let mut w = c + period;
    while w < w_cut {
        pts.push(s_of_w(w));
        w += period;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| *a <= *b);
    if *pts.last().unwrap() < s_cut {
        pts.push(s_cut);
    }

    let dim = 2 * active.len();
    let opts = QuadOptions::new(tol / 3.0, 0.0);
    let head = quadrature::integrate_vector(
        |s, out| {
            let f = profile.real(ab_model::ds_from_radii(s, r1, r2));
            for (slot, &i) in active.iter().enumerate() {
                let v = weights[i].real(s) * f;
                out[2 * slot] = v.re;
                out[2 * slot + 1] = v.im;
            }
        },
        dim,
        &pts,
        &opts,
    )?;

    let tail = |outgoing: bool| {
        let scale = 1.0 / kappa;
        quadrature::integrate_vector(
            |u, out| {
                if u >= 1.0 {
                    out.fill(0.0);
                    return;
                }
                let t = scale * u / (1.0 - u);
                let dt = scale / ((1.0 - u) * (1.0 - u));
                let w = Complex64::new(w_cut, if outgoing { t } else { -t });
                let qm1 = (w - c) * (w + c) / p2;
                let qp1 = (w - e) * (w + e) / p2;
                let sinh_s = qm1.sqrt() * qp1.sqrt();
                let exp_s = qm1 + 1.0 + sinh_s;
                let s = exp_s.ln();
                let exp_neg_s = exp_s.inv();
                let jac = 2.0 * w / (p2 * sinh_s);
                let amp = if outgoing { profile.outgoing(w) } else { profile.incoming(w) };
                let common = amp * jac * ((-kappa * t).exp() * dt);
                for (slot, &i) in active.iter().enumerate() {
                    let b = weights[i].b();
                    let v = weights[i].complex(s, exp_neg_s, qm1 + b * b) * common;
                    let (re, im) = if v.is_finite() { (v.re, v.im) } else { (0.0, 0.0) };
                    out[2 * slot] = re;
                    out[2 * slot + 1] = im;
                }
            },
            dim,
            &[0.0, 0.5, 0.9, 0.99, 1.0],
            &opts,
        )
    };
    let out = tail(true)?;
    let rot_out = Complex64::i() * Complex64::from_polar(1.0, kappa * w_cut);
    let mut error = head.error_estimate + out.error_estimate;
    let mut evaluations = head.evaluations + out.evaluations;
    for (slot, &i) in active.iter().enumerate() {
        values[i] = Complex64::new(head.value[2 * slot], head.value[2 * slot + 1])
            + rot_out * Complex64::new(out.value[2 * slot], out.value[2 * slot + 1]);
    }
    if profile.has_incoming() {
        let inc = tail(false)?;
        let rot_in = -Complex64::i() * Complex64::from_polar(1.0, -kappa * w_cut);
        error += inc.error_estimate;
        evaluations += inc.evaluations;
        for (slot, &i) in active.iter().enumerate() {
            values[i] += rot_in * Complex64::new(inc.value[2 * slot], inc.value[2 * slot + 1]);
        }
    }
    Ok(DiffractiveOutcome { values, error_estimate: error, evaluations })
}

fn diffractive_single<P: RadialProfile>(weight: &BWeight, r1: f64, r2: f64, profile: &P, tol: f64) -> Result<(Complex64, f64), QuadError> {
    let out = diffractive_batch(std::slice::from_ref(weight), r1, r2, profile, tol)?;
    Ok((out.values[0], out.error_estimate))
}

// ---------------------------------------------------------------------------
// closed forms

/// Geometric plus diffractive Bochner-Riesz kernel.
pub fn br_kernel_closed(x: &PolarPoint, y: &PolarPoint, params: &BRParams) -> Result<KernelDecomposition, KernelError> {
    let a = a_factor(x.theta, y.theta, &params.flux, &params.potential);
    let d = ab_model::distance_d(x, y);
    let geometric = BR_GEOMETRIC_CONSTANT * a * br_profile(d, params.lambda, params.delta);
    let weight = BWeight::new(x.theta, y.theta, &params.flux, &params.potential);
    if weight.vanishes() {
        return Ok(KernelDecomposition::new(geometric, Complex64::new(0.0, 0.0), 0.0));
    }
    let profile = BrRadial::new(params.lambda, params.delta);
    let (dv, err) = diffractive_single(&weight, x.r, y.r, &profile, params.tol / BR_DIFFRACTIVE_CONSTANT)?;
    Ok(KernelDecomposition::new(geometric, BR_DIFFRACTIVE_CONSTANT * dv, BR_DIFFRACTIVE_CONSTANT * err))
}

/// Closed-form kernels for one radial pair and a batch of angle differences
/// (pure potential only; `dthetas` are `theta1 - theta2`).
pub(crate) fn br_closed_angular_batch(r1: f64, r2: f64, dthetas: &[f64], params: &BRParams) -> Result<Vec<Complex64>, KernelError> {
    let fl = params.flux;
    let pot = AngularPotential::pure(fl.alpha_total);
    let profile = BrRadial::new(params.lambda, params.delta);
    let weights: Vec<BWeight> = dthetas.iter().map(|&dt| BWeight::new(dt, 0.0, &fl, &pot)).collect();
    let diff = diffractive_batch(&weights, r1, r2, &profile, params.tol / BR_DIFFRACTIVE_CONSTANT)?;
    Ok(dthetas
        .iter()
        .zip(diff.values)
        .map(|(&dt, dv)| {
            let d = ab_model::distance_from_radii(r1, r2, dt);
            BR_GEOMETRIC_CONSTANT * a_factor(dt, 0.0, &fl, &pot) * br_profile(d, params.lambda, params.delta) + BR_DIFFRACTIVE_CONSTANT * dv
        })
        .collect())
}

fn check_flux(flux: &FluxParameter, potential: &AngularPotential) -> Result<(), KernelError> {
    let mean = ab_model::flux(potential);
    if (flux.alpha_total - mean).abs() > 1e-12 * (1.0 + mean.abs()) {
        return Err(KernelError::Invalid(format!("flux {} does not match the potential's flux {mean}", flux.alpha_total)));
    }
    Ok(())
}

/// Density `dE(rho)(x, y)` of the spectral measure, normalized so that
/// `S_lambda^delta(x, y) = int_0^lambda (1 - rho^2/lambda^2)^delta dE(rho)(x, y) d rho`.
pub fn spectral_measure_kernel(
    rho: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    flux: &FluxParameter,
    potential: &AngularPotential,
    tol: f64,
) -> Result<Complex64, KernelError> {
    Ok(spectral_measure_decomposition(rho, x, y, flux, potential, tol)?.total)
}

/// [`spectral_measure_kernel`] with its two terms.
pub fn spectral_measure_decomposition(
    rho: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    flux: &FluxParameter,
    potential: &AngularPotential,
    tol: f64,
) -> Result<KernelDecomposition, KernelError> {
    if !(rho > 0.0) || !(tol > 0.0) {
        return Err(KernelError::Invalid(format!("rho and tol must be > 0, got {rho}, {tol}")));
    }
    check_flux(flux, potential)?;
    let a = a_factor(x.theta, y.theta, flux, potential);
    let d = ab_model::distance_d(x, y);
    let geometric = SPECTRAL_GEOMETRIC_CONSTANT * rho * a * specfun::j_unchecked(0.0, rho * d).0;
    let weight = BWeight::new(x.theta, y.theta, flux, potential);
    if weight.vanishes() {
        return Ok(KernelDecomposition::new(geometric, Complex64::new(0.0, 0.0), 0.0));
    }
    let c = SPECTRAL_DIFFRACTIVE_CONSTANT * rho;
    let (dv, err) = diffractive_single(&weight, x.r, y.r, &J0Radial { rho }, tol / c)?;
    Ok(KernelDecomposition::new(geometric, c * dv, c * err))
}

/// Orientation of the limiting absorption `(L - (lambda^2 +- i0))^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResolventSign {
    Outgoing,
    Incoming,
}

/// Resolvent kernel `(L_A - (lambda^2 +- i0))^{-1}(x, y)`, `x != y`.
pub fn resolvent_kernel(
    lambda: f64,
    sign: ResolventSign,
    x: &PolarPoint,
    y: &PolarPoint,
    flux: &FluxParameter,
    potential: &AngularPotential,
    tol: f64,
) -> Result<Complex64, KernelError> {
    Ok(resolvent_decomposition(lambda, sign, x, y, flux, potential, tol)?.total)
}

/// [`resolvent_kernel`] with its two terms.
pub fn resolvent_decomposition(
    lambda: f64,
    sign: ResolventSign,
    x: &PolarPoint,
    y: &PolarPoint,
    flux: &FluxParameter,
    potential: &AngularPotential,
    tol: f64,
) -> Result<KernelDecomposition, KernelError> {
    if !(lambda > 0.0) || !(tol > 0.0) {
        return Err(KernelError::Invalid(format!("lambda and tol must be > 0, got {lambda}, {tol}")));
    }
    check_flux(flux, potential)?;
    if ab_model::distance_d(x, y) == 0.0 {
        return Err(KernelError::Diagonal);
    }
    match sign {
        ResolventSign::Outgoing => outgoing_resolvent(lambda, x, y, flux, potential, tol),
        ResolventSign::Incoming => {
            let neg = potential.negated();
            let neg_flux = FluxParameter::new(-flux.alpha_total);
            let o = outgoing_resolvent(lambda, x, y, &neg_flux, &neg, tol)?;
            Ok(KernelDecomposition::new(o.geometric.conj(), o.diffractive.conj(), o.error_estimate))
        }
    }
}

fn outgoing_resolvent(
    lambda: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    flux: &FluxParameter,
    potential: &AngularPotential,
    tol: f64,
) -> Result<KernelDecomposition, KernelError> {
    let a = a_factor(x.theta, y.theta, flux, potential);
    let d = ab_model::distance_d(x, y);
    let geometric = RESOLVENT_GEOMETRIC_CONSTANT * a * hankel1_0_unchecked(lambda * d);
    let weight = BWeight::new(x.theta, y.theta, flux, potential);
    if weight.vanishes() {
        return Ok(KernelDecomposition::new(geometric, Complex64::new(0.0, 0.0), 0.0));
    }
    let c = RESOLVENT_DIFFRACTIVE_CONSTANT;
    let (dv, err) = diffractive_single(&weight, x.r, y.r, &H0Radial { lambda }, tol / c.norm())?;
    Ok(KernelDecomposition::new(geometric, c * dv, c.norm() * err))
}

/// `(rho / (i pi)) (R(rho^2 + i0) - R(rho^2 - i0))(x, y)`.
pub fn stone_density(
    rho: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    flux: &FluxParameter,
    potential: &AngularPotential,
    tol: f64,
) -> Result<Complex64, KernelError> {
    let plus = resolvent_kernel(rho, ResolventSign::Outgoing, x, y, flux, potential, tol)?;
    let minus = resolvent_kernel(rho, ResolventSign::Incoming, x, y, flux, potential, tol)?;
    Ok(rho / (Complex64::i() * PI) * (plus - minus))
}

/// Free outgoing resolvent `(i/4) H_0^(1)(lambda |x - y|)`.
pub fn free_resolvent(lambda: f64, dist: f64) -> Result<Complex64, KernelError> {
    Ok(Complex64::new(0.0, 0.25) * specfun::hankel1_0(lambda * dist)?)
}

// ---------------------------------------------------------------------------
// partial-wave oracles

/// Ladder index of `nu = |k' + alpha0|`: ladder 0 carries `|alpha0| + n`,
/// ladder 1 carries `1 - |alpha0| + n`.
pub(crate) fn ladder_slot(kp: i64, a0: f64) -> (usize, usize) {
    let v = kp as f64 + a0;
    let n = kp.unsigned_abs() as usize;
    if v >= 0.0 {
        if a0 >= 0.0 {
            (0, n)
        } else {
            (1, n - 1)
        }
    } else if a0 > 0.0 {
        (1, n - 1)
    } else {
        (0, n)
    }
}

pub(crate) fn ladder_orders(a0: f64) -> [f64; 2] {
    [a0.abs(), 1.0 - a0.abs()]
}

/// Upper bound for `sum_{n > n_max} scale * c^nu / Gamma(nu + 1)^2` over both ladders.
fn tail_bound(n_max: usize, a0: f64, log_scale: f64, log_c: f64) -> f64 {
    let mut total = 0.0;
    for mu in ladder_orders(a0) {
        for n in (n_max + 1)..(n_max + 2000) {
            let nu = mu + n as f64;
            let t = (log_scale + nu * log_c - 2.0 * specfun::ln_gamma_unchecked(nu + 1.0)).exp();
            total += t;
            if t < 1e-300 || (n > n_max + 5 && t < 1e-20 * total) {
                break;
            }
        }
    }
    total / TAU
}

/// Sums `conj(phi_k(theta1)) phi_k(theta2) m_k` with the radial table supplied
/// by `radial(n_max)` (indexed by ladder and step), extending the window until
/// the edge terms and the analytic tail are below `tol`.
fn partial_wave_sum<R>(
    x: &PolarPoint,
    y: &PolarPoint,
    flux: &FluxParameter,
    potential: &AngularPotential,
    k_init: usize,
    tol: f64,
    tail: impl Fn(usize) -> f64,
    keep_terms: bool,
    mut radial: R,
) -> Result<(Complex64, SeriesDiagnostics), KernelError>
where
    R: FnMut(usize) -> Result<[Vec<f64>; 2], KernelError>,
{
    let a0 = flux.alpha0;
    let m = flux.m;
    let mut n_max = k_init.min(SERIES_K_CAP);
    loop {
        let table = radial(n_max)?;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut magnitude = 0.0;
        let mut terms = Vec::with_capacity(2 * n_max + 1);
        let nk = n_max as i64;
        for kp in -nk..=nk {
            let (ladder, idx) = ladder_slot(kp, a0);
            let k = kp - m;
            let phase = ab_model::eigenfunction(k, x.theta, potential).conj() * ab_model::eigenfunction(k, y.theta, potential);
            let t = phase * table[ladder][idx];
            sum += t;
            magnitude += t.norm();
            terms.push((k, t.norm()));
        }
        let edge = terms.iter().take(5).chain(terms.iter().rev().take(5)).all(|&(_, v)| v <= tol * magnitude);
        let bound = tail(n_max);
        if edge && bound <= tol {
            let diag = SeriesDiagnostics { k_max_used: n_max, tail_bound: bound, terms: keep_terms.then_some(terms) };
            return Ok((sum, diag));
        }
        if n_max >= SERIES_K_CAP {
            return Err(KernelError::Truncation { k_max: n_max, tail_bound: bound });
        }
        n_max = (n_max + n_max / 2).min(SERIES_K_CAP);
    }
}

fn initial_window(z: f64) -> usize {
    (std::f64::consts::E * z).ceil() as usize + 30
}

/// Radial Bochner-Riesz factors `int_0^lambda (1 - rho^2/lambda^2)^delta J_nu(rho r1) J_nu(rho r2) rho d rho`
/// for `nu = mu_l + n`, `n <= n_max`, both ladders at once.
fn br_radial_table(r1: f64, r2: f64, lambda: f64, delta: f64, a0: f64, n_max: usize, tol: f64) -> Result<[Vec<f64>; 2], KernelError> {
    let mus = ladder_orders(a0);
    let same_mu = mus[0] == mus[1];
    let same_r = r1 == r2;
    let len = n_max + 1;
    let scale = 0.5 * lambda * lambda;
    let osc = (lambda * r1.max(r2) / 3.0).ceil().max(1.0) as usize;
    let points: Vec<f64> = (0..=osc).map(|k| k as f64 / osc as f64).collect();
    let opts = QuadOptions::new(tol * TAU / scale, 0.0);
    let mut b1 = vec![0.0; len];
    let mut b2 = vec![0.0; len];
    let r = quadrature::integrate_vector(
        |u, out| {
            let w = if delta == 0.0 { 1.0 } else { u.powf(delta) };
            let v = (1.0 - u).max(0.0).sqrt();
            for (l, &mu) in mus.iter().enumerate() {
                let dst = l * len;
                if l == 1 && same_mu {
                    out.copy_within(0..len, len);
                    continue;
                }
                specfun::j_ladder(mu, lambda * r1 * v, &mut b1);
                if !same_r {
                    specfun::j_ladder(mu, lambda * r2 * v, &mut b2);
                }
                let second = if same_r { &b1 } else { &b2 };
                for n in 0..len {
                    out[dst + n] = w * b1[n] * second[n];
                }
            }
        },
        2 * len,
        &points,
        &opts,
    )?;
    let v = r.value;
    Ok([v[..len].iter().map(|t| scale * t).collect(), v[len..].iter().map(|t| scale * t).collect()])
}

fn series_inputs(x: &PolarPoint, y: &PolarPoint, k: f64) -> Result<f64, KernelError> {
    let z = k * x.r.max(y.r);
    if z > SERIES_RADIUS_CAP {
        return Err(KernelError::RadiusCap(z));
    }
    Ok(z)
}

/// Partial-wave Bochner-Riesz kernel.
pub fn br_kernel_series(x: &PolarPoint, y: &PolarPoint, params: &BRParams) -> Result<(Complex64, SeriesDiagnostics), KernelError> {
    br_series_impl(x, y, params, false)
}

/// [`br_kernel_series`] keeping the per-index magnitudes.
pub fn br_kernel_series_terms(x: &PolarPoint, y: &PolarPoint, params: &BRParams) -> Result<(Complex64, SeriesDiagnostics), KernelError> {
    br_series_impl(x, y, params, true)
}

fn br_series_impl(x: &PolarPoint, y: &PolarPoint, params: &BRParams, keep: bool) -> Result<(Complex64, SeriesDiagnostics), KernelError> {
    let lam = params.lambda;
    let z = series_inputs(x, y, lam)?;
    let a0 = params.flux.alpha0;
    let log_scale = (0.5 * lam * lam).ln();
    let log_c = (0.25 * lam * lam * x.r * y.r).ln();
    partial_wave_sum(
        x,
        y,
        &params.flux,
        &params.potential,
        initial_window(z),
        params.tol,
        |n| tail_bound(n, a0, log_scale, log_c),
        keep,
        |n| br_radial_table(x.r, y.r, lam, params.delta, a0, n, params.tol),
    )
}

/// Partial-wave spectral measure density `sum_k conj(phi_k) phi_k rho J_nu(rho r1) J_nu(rho r2)`.
pub fn spectral_measure_series(
    rho: f64,
    x: &PolarPoint,
    y: &PolarPoint,
    flux: &FluxParameter,
    potential: &AngularPotential,
    tol: f64,
) -> Result<(Complex64, SeriesDiagnostics), KernelError> {
    if !(rho > 0.0) {
        return Err(KernelError::Invalid(format!("rho must be > 0, got {rho}")));
    }
    check_flux(flux, potential)?;
    let z = series_inputs(x, y, rho)?;
    let a0 = flux.alpha0;
    let log_scale = rho.ln();
    let log_c = (0.25 * rho * rho * x.r * y.r).ln();
    partial_wave_sum(
        x,
        y,
        flux,
        potential,
        initial_window(z),
        tol,
        |n| tail_bound(n, a0, log_scale, log_c),
        false,
        |n| {
            let mut out = [vec![0.0; n + 1], vec![0.0; n + 1]];
            let mut b2 = vec![0.0; n + 1];
            for (l, mu) in ladder_orders(a0).into_iter().enumerate() {
                specfun::j_ladder(mu, rho * x.r, &mut out[l]);
                specfun::j_ladder(mu, rho * y.r, &mut b2);
                for (v, w) in out[l].iter_mut().zip(&b2) {
                    *v *= rho * w;
                }
            }
            Ok(out)
        },
    )
}

// ---------------------------------------------------------------------------
// calibration

/// `c` written as `(num/den) pi^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiMultiple {
    pub value: f64,
    pub power: i32,
    pub numerator: i64,
    pub denominator: i64,
    pub residual: f64,
}

/// Best rational `num/den` (denominator up to 12) with `value ~ (num/den) pi^power`.
pub fn pi_multiple(value: f64, power: i32) -> PiMultiple {
    let base = PI.powi(power);
    let ratio = value / base;
    let mut best = PiMultiple { value, power, numerator: 0, denominator: 1, residual: f64::INFINITY };
    for den in 1..=12 {
        let num = (ratio * den as f64).round();
        let res = (value - num / den as f64 * base).abs();
        if res < best.residual - 1e-15 {
            best = PiMultiple { value, power, numerator: num as i64, denominator: den, residual: res };
        }
    }
    best
}

/// Constants recovered by least squares against the oracles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    /// BR geometric constant, series oracle at alpha = 0.
    pub br_geometric: PiMultiple,
    /// Spectral geometric constant, series oracle at alpha = 0.
    pub spectral_geometric: PiMultiple,
    /// Imaginary part of the resolvent geometric constant, free resolvent at alpha = 0.
    pub resolvent_geometric: PiMultiple,
    /// BR diffractive constant, series oracle at alpha = 1/2.
    pub br_diffractive: PiMultiple,
    /// Spectral diffractive constant, series oracle at alpha = 1/2.
    pub spectral_diffractive: PiMultiple,
    /// Imaginary part of the resolvent diffractive constant, from the spectral series through the resolvent jump.
    pub resolvent_diffractive: PiMultiple,
    pub samples: usize,
}

fn least_squares(model: &[Complex64], data: &[Complex64]) -> f64 {
    let num: f64 = model.iter().zip(data).map(|(g, s)| (g.conj() * s).re).sum();
    let den: f64 = model.iter().map(|g| g.norm_sqr()).sum();
    num / den
}

/// Recovers every kernel constant from the oracles on the given point pairs.
/// Geometric constants use `alpha = 0`; diffractive constants use
/// `alpha = 1/2`, where the geometric constant is already fixed.
pub fn calibrate(pairs: &[(PolarPoint, PolarPoint)], lambda: f64, delta: f64, tol: f64) -> Result<CalibrationReport, KernelError> {
    if pairs.is_empty() {
        return Err(KernelError::Invalid("calibration needs at least one point pair".into()));
    }
    let free = AngularPotential::pure(0.0);
    let f0 = FluxParameter::new(0.0);
    let half = AngularPotential::pure(0.5);
    let fh = FluxParameter::new(0.5);
    let br0 = BRParams::new(lambda, delta, free.clone(), tol)?;
    let brh = BRParams::new(lambda, delta, half.clone(), tol)?;
    let rho = lambda;
    let (mut g_br, mut s_br, mut g_sp, mut s_sp, mut g_res, mut s_res) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    let (mut d_br, mut t_br, mut d_sp, mut t_sp, mut h_res, mut t_res) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for (x, y) in pairs {
        let d = ab_model::distance_d(x, y);
        let a = a_factor(x.theta, y.theta, &f0, &free);
        g_br.push(a * br_profile(d, lambda, delta));
        s_br.push(br_kernel_series(x, y, &br0)?.0);
        g_sp.push(a * rho * specfun::j_unchecked(0.0, rho * d).0);
        s_sp.push(spectral_measure_series(rho, x, y, &f0, &free, tol)?.0);
        if d > 0.0 {
            g_res.push(Complex64::i() * a * hankel1_0_unchecked(lambda * d));
            s_res.push(free_resolvent(lambda, d)?);
        }

        let ah = a_factor(x.theta, y.theta, &fh, &half);
        let wh = BWeight::new(x.theta, y.theta, &fh, &half);
        let series_h = br_kernel_series(x, y, &brh)?.0;
        let (ib, _) = diffractive_single(&wh, x.r, y.r, &BrRadial::new(lambda, delta), tol)?;
        d_br.push(ib);
        t_br.push(series_h - BR_GEOMETRIC_CONSTANT * ah * br_profile(d, lambda, delta));
        let sp_h = spectral_measure_series(rho, x, y, &fh, &half, tol)?.0;
        let (is, _) = diffractive_single(&wh, x.r, y.r, &J0Radial { rho }, tol)?;
        d_sp.push(rho * is);
        t_sp.push(sp_h - SPECTRAL_GEOMETRIC_CONSTANT * ah * rho * specfun::j_unchecked(0.0, rho * d).0);
        if d > 0.0 {
            // jump of the resolvent: (rho/(i pi)) (i c I_+ - conj(i c I_-)) = (rho c/pi)(I_+ + conj(I_-))
            let neg = half.negated();
            let fneg = FluxParameter::new(-0.5);
            let wn = BWeight::new(x.theta, y.theta, &fneg, &neg);
            let (ip, _) = diffractive_single(&wh, x.r, y.r, &H0Radial { lambda: rho }, tol)?;
            let (im, _) = diffractive_single(&wn, x.r, y.r, &H0Radial { lambda: rho }, tol)?;
            h_res.push(rho / PI * (ip + im.conj()));
            let geo_plus = RESOLVENT_GEOMETRIC_CONSTANT * ah * hankel1_0_unchecked(rho * d);
            let an = a_factor(x.theta, y.theta, &fneg, &neg);
            let geo_minus = (RESOLVENT_GEOMETRIC_CONSTANT * an * hankel1_0_unchecked(rho * d)).conj();
            t_res.push(sp_h - rho / (Complex64::i() * PI) * (geo_plus - geo_minus));
        }
    }
    Ok(CalibrationReport {
        br_geometric: pi_multiple(least_squares(&g_br, &s_br), 1),
        spectral_geometric: pi_multiple(least_squares(&g_sp, &s_sp), 1),
        resolvent_geometric: pi_multiple(least_squares(&g_res, &s_res), 2),
        br_diffractive: pi_multiple(least_squares(&d_br, &t_br), 0),
        spectral_diffractive: pi_multiple(least_squares(&d_sp, &t_sp), 0),
        resolvent_diffractive: pi_multiple(least_squares(&h_res, &t_res), 1),
        samples: pairs.len(),
    })
}

// ---------------------------------------------------------------------------
// free-kernel envelope

/// Envelope fit of `|free_br_kernel|` against `lambda^2 (1 + lambda d)^{-3/2 - delta}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeReport {
    pub delta: f64,
    /// Fitted log-log slope of the envelope in `1 + lambda d`.
    pub slope: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// `(lambda, lambda d, envelope / model)` per window.
    pub samples: Vec<(f64, f64, f64)>,
}

impl AmplitudeReport {
    pub fn ratio_spread(&self) -> f64 {
        self.ratio_max / self.ratio_min
    }
}

/// Scans `samples` log-spaced windows of one period in `lambda d in [20, 2000]`
/// for each `lambda`, taking the window maximum as the envelope.
pub fn asymptotic_amplitude_check(lambda_list: &[f64], delta: f64, samples: usize) -> Result<AmplitudeReport, KernelError> {
    if lambda_list.is_empty() || samples < 2 || lambda_list.iter().any(|l| !(*l > 0.0)) || !(delta >= 0.0) {
        return Err(KernelError::Invalid("need positive lambdas, delta >= 0 and at least 2 samples".into()));
    }
    let (z_lo, z_hi) = (20.0f64, 2000.0f64);
    let mut rows = Vec::new();
    for &lam in lambda_list {
        for i in 0..samples {
            let z0 = z_lo * (z_hi / z_lo).powf(i as f64 / (samples - 1) as f64);
            let mut peak: f64 = 0.0;
            let mut at = z0;
            for k in 0..=512 {
                let z = (z0 - PI) + TAU * k as f64 / 512.0;
                let v = free_br_kernel(z / lam, lam, delta).abs();
                if v > peak {
                    peak = v;
                    at = z;
                }
            }
            let model = lam * lam * (1.0 + at).powf(-1.5 - delta);
            rows.push((lam, at, peak / model));
        }
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 + r.1).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.2 * (1.0 + r.1).powf(-1.5 - delta)).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let ratio_min = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let ratio_max = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(AmplitudeReport { delta, slope: sxy / sxx, ratio_min, ratio_max, samples: rows })
}
