//! Adaptive Gauss-Kronrod integration.
//!
//! One global-adaptive 21-point engine serves everything: scalar, complex and
//! vector-valued integrands (a complex value is two real components). Error
//! estimates use the QUADPACK scaling of `|G10 - K21|`; the per-interval error
//! of a vector integrand is the sum of its component errors, so the reported
//! estimate bounds the error of any unit-modulus linear combination of the
//! components.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::specfun::{self, SpecFunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("no convergence after {evaluations} evaluations: error {error_estimate:e} on worst interval [{worst_a}, {worst_b}]")]
    NonConvergence { worst_a: f64, worst_b: f64, error_estimate: f64, evaluations: usize },
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("decay hypothesis violated: |f({s})| e^({rate} s) = {scaled:e} exceeds the probe bound {bound:e}")]
    Hypothesis { s: f64, rate: f64, scaled: f64, bound: f64 },
    #[error("invalid integration request: {0}")]
    Invalid(String),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Integral value with error estimate and number of integrand evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Stopping rule: `error <= max(abs_tol, rel_tol * |value|)` with at most
/// `limit` subintervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub limit: usize,
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, limit: 4000 }
    }

    /// The `max(tol, tol |value|)` rule used by the scalar entry points.
    pub fn mixed(tol: f64) -> Self {
        Self::new(tol, tol)
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] =
    [0.066_671_344_308_688_14, 0.149_451_349_150_580_6, 0.219_086_362_515_982_04, 0.269_266_719_309_996_35, 0.295_524_224_714_752_87];

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Reusable buffers for one 21-point rule application.
struct Rule {
    dim: usize,
    samples: Vec<f64>, // 21 x dim, node order: centre, then +/- pairs
}

impl Rule {
    fn new(dim: usize) -> Self {
        Self { dim, samples: vec![0.0; 21 * dim] }
    }

    fn apply<F: FnMut(f64, &mut [f64])>(&mut self, f: &mut F, a: f64, b: f64) -> Result<Segment, QuadError> {
        let dim = self.dim;
        let centre = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        {
            let (c, rest) = self.samples.split_at_mut(dim);
            f(centre, c);
            check_finite(centre, c)?;
            for j in 0..10 {
                let dx = half * XGK[j];
                let (lo, hi) = rest[2 * j * dim..(2 * j + 2) * dim].split_at_mut(dim);
                f(centre - dx, lo);
                check_finite(centre - dx, lo)?;
                f(centre + dx, hi);
                check_finite(centre + dx, hi)?;
            }
        }
        let mut value = vec![0.0; dim];
        let mut error = 0.0;
        for c in 0..dim {
            let fc = self.samples[c];
            let mut resk = WGK[10] * fc;
            let mut resg = 0.0;
            let mut resabs = resk.abs();
            for j in 0..10 {
                let f1 = self.samples[(1 + 2 * j) * dim + c];
                let f2 = self.samples[(2 + 2 * j) * dim + c];
                resk += WGK[j] * (f1 + f2);
                resabs += WGK[j] * (f1.abs() + f2.abs());
                if j % 2 == 1 {
                    resg += WG[j / 2] * (f1 + f2);
                }
            }
            let mean = 0.5 * resk;
            let mut resasc = WGK[10] * (fc - mean).abs();
            for j in 0..10 {
                let f1 = self.samples[(1 + 2 * j) * dim + c];
                let f2 = self.samples[(2 + 2 * j) * dim + c];
                resasc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
            }
            let hl = half.abs();
            let mut err = ((resk - resg) * half).abs();
            resasc *= hl;
            resabs *= hl;
            if resasc != 0.0 && err != 0.0 {
                err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
            }
            if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
                err = err.max(50.0 * f64::EPSILON * resabs);
            }
            value[c] = resk * half;
            error += err;
        }
        Ok(Segment { a, b, value, error })
    }
}

fn check_finite(x: f64, v: &[f64]) -> Result<(), QuadError> {
    if v.iter().all(|y| y.is_finite()) {
        Ok(())
    } else {
        Err(QuadError::NonFinite { x })
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Vector-valued global adaptive integration over the consecutive intervals
/// defined by `points` (at least two, increasing). `f(x, out)` writes `dim`
/// components. The tolerance applies to the summed component errors against
/// the L1 norm of the value.
pub fn integrate_vector<F>(mut f: F, dim: usize, points: &[f64], opts: &QuadOptions) -> Result<QuadResult<Vec<f64>>, QuadError>
where
    F: FnMut(f64, &mut [f64]),
{
    if points.len() < 2 || points.windows(2).any(|w| !(w[0] < w[1])) || points.iter().any(|p| !p.is_finite()) {
        return Err(QuadError::Invalid(format!("breakpoints must be finite and increasing: {points:?}")));
    }
    let mut rule = Rule::new(dim);
    let mut heap = BinaryHeap::new();
    let mut total = vec![0.0; dim];
    let mut total_err = 0.0;
    let mut evaluations = 0;
    let mut settled: Vec<Segment> = Vec::new();
    for w in points.windows(2) {
        let seg = rule.apply(&mut f, w[0], w[1])?;
        evaluations += 21;
        for (t, v) in total.iter_mut().zip(&seg.value) {
            *t += v;
        }
        total_err += seg.error;
        heap.push(seg);
    }
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * l1(&total));
        if total_err <= target {
            break;
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        let tiny = 100.0 * f64::EPSILON * worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE);
        if worst.b - worst.a <= tiny || heap.len() + settled.len() + 2 > opts.limit {
            let (wa, wb, we) = (worst.a, worst.b, worst.error);
            if worst.b - worst.a <= tiny && heap.len() + settled.len() + 2 <= opts.limit {
                settled.push(worst);
                continue;
            }
            return Err(QuadError::NonConvergence { worst_a: wa, worst_b: wb, error_estimate: we, evaluations });
        }
        let left = rule.apply(&mut f, worst.a, mid)?;
        let right = rule.apply(&mut f, mid, worst.b)?;
        evaluations += 42;
        for c in 0..dim {
            total[c] += left.value[c] + right.value[c] - worst.value[c];
        }
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    let mut value = vec![0.0; dim];
    let mut error = 0.0;
    for seg in heap.iter().chain(settled.iter()) {
        for (v, s) in value.iter_mut().zip(&seg.value) {
            *v += s;
        }
        error += seg.error;
    }
    let target = opts.abs_tol.max(opts.rel_tol * l1(&value));
    if error > target {
        let worst = settled.iter().max_by(|x, y| x.error.total_cmp(&y.error));
        let (wa, wb, we) = worst.map_or((points[0], points[points.len() - 1], error), |s| (s.a, s.b, s.error));
        return Err(QuadError::NonConvergence { worst_a: wa, worst_b: wb, error_estimate: we, evaluations });
    }
    Ok(QuadResult { value, error_estimate: error, evaluations })
}

/// Real integral over `[a, b]` with `|error| <= max(tol, tol |value|)`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult<f64>, QuadError> {
    integrate_points(f, &[a, b], &QuadOptions::mixed(tol))
}

/// Real integral with interior breakpoints.
pub fn integrate_points<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], opts: &QuadOptions) -> Result<QuadResult<f64>, QuadError> {
    let r = integrate_vector(|x, out| out[0] = f(x), 1, points, opts)?;
    Ok(QuadResult { value: r.value[0], error_estimate: r.error_estimate, evaluations: r.evaluations })
}

/// Complex integral with breakpoints; the error bounds the complex modulus.
pub fn integrate_complex<F: FnMut(f64) -> Complex64>(
    mut f: F,
    points: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult<Complex64>, QuadError> {
    let r = integrate_vector(
        |x, out| {
            let z = f(x);
            out[0] = z.re;
            out[1] = z.im;
        },
        2,
        points,
        opts,
    )?;
    Ok(QuadResult { value: Complex64::new(r.value[0], r.value[1]), error_estimate: r.error_estimate, evaluations: r.evaluations })
}

/// Probe abscissae used to validate `|f(s)| <= M e^{-rate s}`.
fn decay_probes(rate: f64) -> Vec<f64> {
    (1..=8).map(|k| 4.0 * k as f64 / rate).collect()
}

/// Semi-infinite real integral `int_0^inf f`, assuming `|f(s)| <= M e^{-rate s}`.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(mut f: F, decay_rate: f64, tol: f64) -> Result<QuadResult<f64>, QuadError> {
    let r = semi_infinite_vector(|x, out| out[0] = f(x), 1, decay_rate, &[], &QuadOptions::mixed(tol))?;
    Ok(QuadResult { value: r.value[0], error_estimate: r.error_estimate, evaluations: r.evaluations })
}

/// Complex counterpart of [`integrate_semi_infinite`] with optional interior
/// breakpoints (kept only if they fall below the truncation point).
pub fn integrate_semi_infinite_complex<F: FnMut(f64) -> Complex64>(
    mut f: F,
    decay_rate: f64,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult<Complex64>, QuadError> {
    let r = semi_infinite_vector(
        |x, out| {
            let z = f(x);
            out[0] = z.re;
            out[1] = z.im;
        },
        2,
        decay_rate,
        breakpoints,
        opts,
    )?;
    Ok(QuadResult { value: Complex64::new(r.value[0], r.value[1]), error_estimate: r.error_estimate, evaluations: r.evaluations })
}

/// Truncates at `s_max = max(first probe, ln(M / tol) / rate) + 10 / rate`
/// where `M` bounds `|f(s)| e^{rate s}` over the probes, then integrates on
/// `[0, s_max]`. The neglected tail is below `tol / rate`, so the total error
/// stays within twice the tolerance for `rate >= 1` and the tail is added to
/// the reported estimate in any case.
fn semi_infinite_vector<F>(
    mut f: F,
    dim: usize,
    rate: f64,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult<Vec<f64>>, QuadError>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(QuadError::Invalid(format!("decay rate {rate} must be positive")));
    }
    let probes = decay_probes(rate);
    let mut buf = vec![0.0; dim];
    let mut scaled = Vec::with_capacity(probes.len());
    for &s in &probes {
        f(s, &mut buf);
        check_finite(s, &buf)?;
        scaled.push(l1(&buf) * (rate * s).exp());
    }
    let first_max = scaled[..scaled.len() - 2].iter().cloned().fold(0.0, f64::max);
    let floor = opts.abs_tol.max(f64::MIN_POSITIVE);
    for (k, &g) in scaled.iter().enumerate().skip(scaled.len() - 2) {
        let decayed = g * (-rate * probes[k]).exp();
        if g > 100.0 * first_max && decayed > floor {
            return Err(QuadError::Hypothesis { s: probes[k], rate, scaled: g, bound: 100.0 * first_max });
        }
    }
    let m = scaled.iter().cloned().fold(0.0, f64::max).max(floor);
    let tol = opts.abs_tol.max(f64::MIN_POSITIVE);
    let s_max = probes[0].max((m / tol).ln() / rate) + 10.0 / rate;
    let mut points = vec![0.0];
    points.extend(breakpoints.iter().cloned().filter(|&p| p > 0.0 && p < s_max));
    points.push(s_max);
    points.dedup();
    let mut r = integrate_vector(f, dim, &points, opts)?;
    r.error_estimate += m * (-rate * s_max).exp() / rate;
    r.evaluations += probes.len();
    Ok(r)
}

/// Integral over `[0, inf)` of an algebraically decaying integrand via
/// `t = u / (1 - u)`.
pub fn integrate_half_line<F: FnMut(f64) -> Complex64>(
    mut f: F,
    scale: f64,
    opts: &QuadOptions,
) -> Result<QuadResult<Complex64>, QuadError> {
    integrate_complex(
        |u| {
            if u >= 1.0 {
                return Complex64::new(0.0, 0.0);
            }
            let t = scale * u / (1.0 - u);
            let jac = scale / ((1.0 - u) * (1.0 - u));
            let v = f(t) * jac;
            if v.is_finite() {
                v
            } else {
                Complex64::new(0.0, 0.0)
            }
        },
        &[0.0, 0.5, 0.9, 0.99, 1.0],
        opts,
    )
}

/// `int_a^b e^{i lambda phi(s)} psi(s) ds`, pre-split so that every initial
/// subinterval carries about one radian of phase at `|phi'| <= phase_slope`.
pub fn oscillatory_integral<P, A>(
    phi: P,
    psi: A,
    a: f64,
    b: f64,
    lambda: f64,
    phase_slope: f64,
    tol: f64,
) -> Result<QuadResult<Complex64>, QuadError>
where
    P: Fn(f64) -> f64,
    A: Fn(f64) -> f64,
{
    let pieces = ((lambda * phase_slope * (b - a)).ceil() as usize).clamp(1, 20_000);
    let points: Vec<f64> = (0..=pieces).map(|k| a + (b - a) * k as f64 / pieces as f64).collect();
    integrate_complex(|s| Complex64::from_polar(psi(s), lambda * phi(s)), &points, &QuadOptions::new(tol, 0.0))
}

/// `int_0^lambda (1 - rho^2/lambda^2)^delta J_nu(r1 rho) J_nu(r2 rho) rho d rho`,
/// computed after `rho = lambda sqrt(1 - u)` as
/// `(lambda^2 / 2) int_0^1 u^delta J_nu(lambda r1 sqrt(1-u)) J_nu(lambda r2 sqrt(1-u)) du`.
pub fn spectral_profile(nu: f64, r1: f64, r2: f64, lambda: f64, delta: f64, tol: f64) -> Result<QuadResult<f64>, QuadError> {
    if !(lambda > 0.0) || !(delta >= 0.0) || !(r1 >= 0.0) || !(r2 >= 0.0) {
        return Err(QuadError::Invalid(format!(
            "spectral_profile needs lambda > 0, delta >= 0, r >= 0 (got {lambda}, {delta}, {r1}, {r2})"
        )));
    }
    specfun::bessel_j(nu, lambda * r1)?;
    specfun::bessel_j(nu, lambda * r2)?;
    let scale = 0.5 * lambda * lambda;
    let osc = (lambda * r1.max(r2) / 3.0).ceil().max(1.0) as usize;
    let points: Vec<f64> = (0..=osc).map(|k| k as f64 / osc as f64).collect();
    let opts = QuadOptions::new(tol / scale, 0.0);
    let r = integrate_points(
        |u| {
            let w = if delta == 0.0 { 1.0 } else { u.powf(delta) };
            let v = (1.0 - u).max(0.0).sqrt();
            w * specfun::j_unchecked(nu, lambda * r1 * v).0 * specfun::j_unchecked(nu, lambda * r2 * v).0
        },
        &points,
        &opts,
    )?;
    Ok(QuadResult { value: scale * r.value, error_estimate: scale * r.error_estimate, evaluations: r.evaluations })
}

/// Gauss-Jacobi rule for `int_{-1}^{1} (1-x)^a (1+x)^b g(x) dx` (Golub-Welsch).
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && a > -1.0 && b > -1.0, "gauss_jacobi: n >= 1, a, b > -1");
    let ab = a + b;
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let diag = if k == 0 { (b - a) / (ab + 2.0) } else { (b * b - a * a) / (s * (s + 2.0)) };
        jm[(k, k)] = diag;
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + ab;
            // the factor (k1 + ab) / (s1 - 1) is 1 for k1 = 1
            let ratio = if k == 0 { 1.0 } else { (k1 + ab) / (s1 - 1.0) };
            let off = (4.0 * k1 * (k1 + a) * (k1 + b) * ratio / (s1 * s1 * (s1 + 1.0))).sqrt();
            jm[(k, k + 1)] = off;
            jm[(k + 1, k)] = off;
        }
    }
    let mu0 = 2f64.powf(ab + 1.0)
        * (specfun::ln_gamma_unchecked(a + 1.0) + specfun::ln_gamma_unchecked(b + 1.0) - specfun::ln_gamma_unchecked(ab + 2.0)).exp();
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    pairs.into_iter().unzip()
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi(n, 0.0, 0.0)
}
