//! Discretized operators on polar grids: Bochner-Riesz means, dyadic pieces,
//! `L^p` norms, power iteration and convergence experiments.
//!
//! Every operator here has a kernel that depends on the angles only through
//! `theta1 - theta2`, so it is applied mode by mode: an FFT in `theta`, one
//! radial matrix per angular mode, and an inverse FFT. Kernels that are
//! `2 pi`-periodic in the angle difference give circulant operators; the
//! geometric dyadic piece is not periodic and is applied through a
//! zero-padded (Toeplitz) transform.

use std::f64::consts::{PI, TAU};
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use thiserror::Error;

use crate::ab_model::AngularPotential;
use crate::dyadic_bounds::{DyadicError, DyadicPiece, PieceKind};
use crate::kernels::{self, BRParams, KernelError};
use crate::{quadrature, specfun};

/// Default seed of randomized inputs.
pub const DEFAULT_SEED: u64 = 0xAB01;

/// Iterations of the power method.
pub const POWER_ITERATIONS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("grid too coarse: {message}; need at least {required_nr} x {required_ntheta} nodes")]
    Resolution { message: String, required_nr: usize, required_ntheta: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

/// `delta_c(p, n) = max(0, n |1/2 - 1/p| - 1/2)`; `p = inf` is accepted.
pub fn critical_index(p: f64, n: u32) -> Result<f64, LabError> {
    if !(p >= 1.0) {
        return Err(LabError::Invalid(format!("critical index needs p >= 1 (got {p})")));
    }
    let inv = if p.is_infinite() { 0.0 } else { 1.0 / p };
    Ok((n as f64 * (0.5 - inv).abs() - 0.5).max(0.0))
}

// ---------------------------------------------------------------------------
// grids and sampled functions

/// Midpoint polar grid on the disk of radius `radius`; node `(i, m)` is
/// stored at `i * ntheta + m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarGrid {
    pub radius: f64,
    pub r_nodes: Vec<f64>,
    pub theta_nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub dr: f64,
    pub dtheta: f64,
}

impl PolarGrid {
    pub fn new(nr: usize, ntheta: usize, radius: f64) -> Result<Self, LabError> {
        if nr == 0 || ntheta < 2 || !(radius > 0.0) || !radius.is_finite() {
            return Err(LabError::Invalid(format!("grid needs nr >= 1, ntheta >= 2, radius > 0 (got {nr}, {ntheta}, {radius})")));
        }
        let dr = radius / nr as f64;
        let dtheta = TAU / ntheta as f64;
        let r_nodes: Vec<f64> = (0..nr).map(|i| (i as f64 + 0.5) * dr).collect();
        let theta_nodes: Vec<f64> = (0..ntheta).map(|m| m as f64 * dtheta).collect();
        let weights = r_nodes.iter().flat_map(|&r| std::iter::repeat_n(r * dr * dtheta, ntheta)).collect();
        Ok(Self { radius, r_nodes, theta_nodes, weights, dr, dtheta })
    }

    pub fn nr(&self) -> usize {
        self.r_nodes.len()
    }

    pub fn ntheta(&self) -> usize {
        self.theta_nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nr() * self.ntheta()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(r, theta)` of node `idx`.
    pub fn node(&self, idx: usize) -> (f64, f64) {
        (self.r_nodes[idx / self.ntheta()], self.theta_nodes[idx % self.ntheta()])
    }

    fn radial_weight(&self, i: usize) -> f64 {
        self.r_nodes[i] * self.dr
    }

    /// Checks `lambda dr <= 1/4` and `lambda R dtheta <= 1/4`.
    pub fn check_resolution(&self, lambda: f64) -> Result<(), LabError> {
        let radial = lambda * self.dr;
        let angular = lambda * self.radius * self.dtheta;
        if radial <= 0.25 && angular <= 0.25 {
            return Ok(());
        }
        Err(LabError::Resolution {
            message: format!(
                "lambda = {lambda}, R = {}: lambda dr = {radial:.3}, lambda R dtheta = {angular:.3} (both must be <= 1/4)",
                self.radius
            ),
            required_nr: (4.0 * lambda * self.radius).ceil() as usize,
            required_ntheta: (8.0 * PI * lambda * self.radius).ceil() as usize,
        })
    }
}

/// Complex samples on the nodes of a [`PolarGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction<'g> {
    pub grid: &'g PolarGrid,
    pub values: Vec<Complex64>,
}

impl<'g> SampledFunction<'g> {
    pub fn new(grid: &'g PolarGrid, values: Vec<Complex64>) -> Result<Self, LabError> {
        if values.len() != grid.len() {
            return Err(LabError::Invalid(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("sampled function".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &'g PolarGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f(r, theta)`.
    pub fn from_fn(grid: &'g PolarGrid, f: impl Fn(f64, f64) -> Complex64) -> Result<Self, LabError> {
        let values = (0..grid.len()).map(|idx| {
            let (r, t) = grid.node(idx);
            f(r, t)
        });
        Self::new(grid, values.collect())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }
}

fn lp_norm_values(values: &[Complex64], weights: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.norm()));
    }
    let s: f64 = values.iter().zip(weights).map(|(v, w)| v.norm().powf(p) * w).sum();
    s.powf(1.0 / p)
}

/// `(sum |f|^p w)^{1/p}`, or `max |f|` for `p = inf`.
pub fn lp_norm(f: &SampledFunction, p: f64) -> Result<f64, LabError> {
    if !(p >= 1.0) {
        return Err(LabError::Invalid(format!("L^p norm needs p >= 1 (got {p})")));
    }
    Ok(lp_norm_values(&f.values, &f.grid.weights, p))
}

// ---------------------------------------------------------------------------
// operators

/// A linear operator on the samples of one grid.
pub trait GridOperator: Sync {
    fn grid(&self) -> &PolarGrid;
    fn apply_values(&self, f: &[Complex64]) -> Result<Vec<Complex64>, LabError>;
    /// Adjoint with respect to the weighted inner product `sum conj(f) g w`.
    fn apply_adjoint_values(&self, f: &[Complex64]) -> Result<Vec<Complex64>, LabError>;

    fn apply<'g>(&self, f: &SampledFunction<'g>) -> Result<SampledFunction<'g>, LabError> {
        let values = self.apply_values(&f.values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("operator output".into()));
        }
        Ok(SampledFunction { grid: f.grid, values })
    }
}

type ModeBuilder<'g> = Box<dyn Fn(usize) -> Result<Vec<Complex64>, LabError> + Send + Sync + 'g>;

/// `(Tf)(r1, theta_a) = sum_{r2, b} k(r1, r2, theta_a - theta_b) f(r2, theta_b) w`,
/// stored as one `nr x nr` matrix per angular mode of period `period`
/// (`ntheta` for periodic kernels, `2 ntheta` otherwise), optionally
/// conjugated by a gauge `h(theta)`: `T = conj(h) T_0 h`.
pub struct AngularConvolution<'g> {
    grid: &'g PolarGrid,
    period: usize,
    modes: Vec<OnceLock<Result<Vec<Complex64>, LabError>>>,
    builder: Option<ModeBuilder<'g>>,
    gauge: Option<Vec<Complex64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl<'g> AngularConvolution<'g> {
    fn with_modes(grid: &'g PolarGrid, period: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            period,
            modes: (0..period).map(|_| OnceLock::new()).collect(),
            builder: None,
            gauge: None,
            forward: planner.plan_fft_forward(period),
            inverse: planner.plan_fft_inverse(period),
        }
    }

    /// Builds the mode matrices from kernel samples. `kernel(i1, i2, dthetas)`
    /// returns `k(r_i1, r_i2, dtheta)` for the given angle differences.
    /// With `periodic`, the differences are `m dtheta` mapped into `(-pi, pi]`;
    /// otherwise they cover `(-2 pi, 2 pi)` on a doubled period.
    /// `symmetric` declares `k(r1, r2, .) = k(r2, r1, .)`.
    pub fn from_kernel<K>(grid: &'g PolarGrid, periodic: bool, symmetric: bool, kernel: K) -> Result<Self, LabError>
    where
        K: Fn(usize, usize, &[f64]) -> Result<Vec<Complex64>, LabError> + Sync,
    {
        let n = grid.ntheta();
        let nr = grid.nr();
        let period = if periodic { n } else { 2 * n };
        let dthetas: Vec<f64> = (0..period)
            .map(|m| {
                let t = m as f64 * grid.dtheta;
                if periodic {
                    if t > PI + 1e-12 {
                        t - TAU
                    } else {
                        t
                    }
                } else if m < n {
                    t
                } else if m == n {
                    f64::NAN
                } else {
                    (m as f64 - period as f64) * grid.dtheta
                }
            })
            .collect();
        let live: Vec<f64> = dthetas.iter().copied().filter(|t| !t.is_nan()).collect();
        let pairs: Vec<(usize, usize)> = (0..nr).flat_map(|i| ((if symmetric { i } else { 0 })..nr).map(move |k| (i, k))).collect();
        let op = Self::with_modes(grid, period);
        let columns: Vec<((usize, usize), Vec<Complex64>)> = pairs
            .par_iter()
            .map(|&(i1, i2)| {
                let vals = kernel(i1, i2, &live)?;
                let mut buf = vec![Complex64::new(0.0, 0.0); period];
                let mut it = vals.into_iter();
                for (slot, t) in buf.iter_mut().zip(&dthetas) {
                    if !t.is_nan() {
                        *slot = it.next().unwrap_or_default();
                    }
                }
                if buf.iter().any(|v| !v.is_finite()) {
                    return Err(LabError::NonFinite(format!("kernel at radial pair ({i1}, {i2})")));
                }
                op.forward.process(&mut buf);
                Ok(((i1, i2), buf))
            })
            .collect::<Result<_, LabError>>()?;
        let mut mats = vec![vec![Complex64::new(0.0, 0.0); nr * nr]; period];
        for ((i1, i2), col) in columns {
            for (mode, v) in col.into_iter().enumerate() {
                let v = v * grid.dtheta;
                mats[mode][i1 * nr + i2] = v;
                if symmetric {
                    mats[mode][i2 * nr + i1] = v;
                }
            }
        }
        for (cell, m) in op.modes.iter().zip(mats) {
            let _ = cell.set(Ok(m));
        }
        Ok(op)
    }

    /// Lazily built modes: `builder(n)` returns the `nr x nr` matrix of mode `n`.
    fn lazy(grid: &'g PolarGrid, periodic: bool, builder: ModeBuilder<'g>) -> Self {
        let period = if periodic { grid.ntheta() } else { 2 * grid.ntheta() };
        let mut op = Self::with_modes(grid, period);
        op.builder = Some(builder);
        op
    }

    fn with_gauge(mut self, gauge: Option<Vec<Complex64>>) -> Self {
        self.gauge = gauge;
        self
    }

    fn mode(&self, n: usize) -> Result<&Vec<Complex64>, LabError> {
        let cell = &self.modes[n];
        let entry = cell.get_or_init(|| match &self.builder {
            Some(b) => b(n),
            None => Ok(vec![Complex64::new(0.0, 0.0); self.grid.nr() * self.grid.nr()]),
        });
        entry.as_ref().map_err(|e| e.clone())
    }

    fn run(&self, f: &[Complex64], adjoint: bool) -> Result<Vec<Complex64>, LabError> {
        let grid = self.grid;
        let (nr, n, p) = (grid.nr(), grid.ntheta(), self.period);
        if f.len() != grid.len() {
            return Err(LabError::Invalid(format!("{} values for a grid of {} nodes", f.len(), grid.len())));
        }
        let zero = Complex64::new(0.0, 0.0);
        // spectra[i][mode]
        let spectra: Vec<Vec<Complex64>> = (0..nr)
            .into_par_iter()
            .map(|i| {
                let mut buf = vec![zero; p];
                for m in 0..n {
                    let v = f[i * n + m];
                    buf[m] = match &self.gauge {
                        Some(h) => h[m] * v,
                        None => v,
                    };
                }
                self.forward.process(&mut buf);
                buf
            })
            .collect();
        let active: Vec<usize> = (0..p).filter(|&mode| spectra.iter().any(|s| s[mode] != zero)).collect();
        for &mode in &active {
            self.mode(mode)?;
        }
        let w: Vec<f64> = (0..nr).map(|i| grid.radial_weight(i)).collect();
        let outputs: Vec<(usize, Vec<Complex64>)> = active
            .par_iter()
            .map(|&mode| {
                let mat = self.modes[mode].get().expect("mode built").as_ref().expect("mode ok");
                let mut out = vec![zero; nr];
                if adjoint {
                    for i1 in 0..nr {
                        let src = spectra[i1][mode] * w[i1];
                        if src == zero {
                            continue;
                        }
                        let row = &mat[i1 * nr..(i1 + 1) * nr];
                        for (o, m) in out.iter_mut().zip(row) {
                            *o += m.conj() * src;
                        }
                    }
                } else {
                    for (i1, o) in out.iter_mut().enumerate() {
                        let row = &mat[i1 * nr..(i1 + 1) * nr];
                        *o = row.iter().zip(0..nr).map(|(m, i2)| m * (spectra[i2][mode] * w[i2])).sum();
                    }
                }
                (mode, out)
            })
            .collect();
        let mut g_spec = vec![vec![zero; p]; nr];
        for (mode, out) in outputs {
            for (i, v) in out.into_iter().enumerate() {
                g_spec[i][mode] = v;
            }
        }
        let scale = 1.0 / p as f64;
        let rows: Vec<Vec<Complex64>> = g_spec
            .into_par_iter()
            .map(|mut buf| {
                self.inverse.process(&mut buf);
                buf.truncate(n);
                buf.iter_mut().enumerate().for_each(|(m, v)| {
                    *v *= scale;
                    if let Some(h) = &self.gauge {
                        *v *= h[m].conj();
                    }
                });
                buf
            })
            .collect();
        Ok(rows.concat())
    }
}

impl GridOperator for AngularConvolution<'_> {
    fn grid(&self) -> &PolarGrid {
        self.grid
    }
    fn apply_values(&self, f: &[Complex64]) -> Result<Vec<Complex64>, LabError> {
        self.run(f, false)
    }
    fn apply_adjoint_values(&self, f: &[Complex64]) -> Result<Vec<Complex64>, LabError> {
        self.run(f, true)
    }
}

// ---------------------------------------------------------------------------
// Bochner-Riesz operator

/// Kernel evaluator used by [`apply_br`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Closed,
    Series,
}

impl FromStr for Method {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "closed" => Ok(Method::Closed),
            "series" => Ok(Method::Series),
            _ => Err(LabError::Invalid(format!("unknown method {s:?} (expected closed or series)"))),
        }
    }
}

/// Bessel tables `J_{mu_l + n}(r_i rho_q)` and Gauss-Jacobi weights for the
/// radial factors `int_0^lambda (1 - rho^2/lambda^2)^delta J_nu(r1 rho) J_nu(r2 rho) rho d rho`.
struct RadialTables {
    a0: f64,
    n_max: usize,
    nq: usize,
    nr: usize,
    weights: Vec<f64>,
    /// `[ladder][(n * nr + i) * nq + q]`
    table: [Vec<f64>; 2],
}

impl RadialTables {
    fn new(grid: &PolarGrid, lambda: f64, delta: f64, a0: f64) -> Self {
        let z = lambda * grid.radius;
        let n_max = (1.4 * z).ceil() as usize + 40;
        let nq = z.ceil() as usize + 48;
        let (xs, ws) = quadrature::gauss_jacobi(nq, delta, 1.0);
        let pre = 0.25 * lambda * lambda * 2f64.powf(-delta);
        let rhos: Vec<f64> = xs.iter().map(|x| 0.5 * lambda * (1.0 + x)).collect();
        let weights: Vec<f64> = xs.iter().zip(&ws).map(|(x, w)| pre * w * (0.5 * (3.0 + x)).powf(delta)).collect();
        let nr = grid.nr();
        let table = kernels::ladder_orders(a0).map(|mu| {
            let cells: Vec<Vec<f64>> = (0..nr * nq)
                .into_par_iter()
                .map(|cell| {
                    let (i, q) = (cell / nq, cell % nq);
                    let mut out = vec![0.0; n_max + 1];
                    specfun::j_ladder(mu, grid.r_nodes[i] * rhos[q], &mut out);
                    out
                })
                .collect();
            let mut t = vec![0.0; (n_max + 1) * nr * nq];
            for (cell, vals) in cells.into_iter().enumerate() {
                let (i, q) = (cell / nq, cell % nq);
                for (n, v) in vals.into_iter().enumerate() {
                    t[(n * nr + i) * nq + q] = v;
                }
            }
            t
        });
        Self { a0, n_max, nq, nr, weights, table }
    }

    /// `sum_{k' = mode mod period, |k'| <= n_max} P_{|k' + a0|}(r1, r2)`.
    fn mode_matrix(&self, mode: usize, period: usize) -> Vec<Complex64> {
        let nr = self.nr;
        let mut mat = vec![0.0; nr * nr];
        let p = period as i64;
        let nm = self.n_max as i64;
        let first = mode as i64 - ((mode as i64 + nm) / p) * p;
        let mut kp = first;
        while kp <= nm {
            if kp >= -nm {
                let (ladder, idx) = kernels::ladder_slot(kp, self.a0);
                if idx <= self.n_max {
                    let tab = &self.table[ladder][idx * nr * self.nq..(idx + 1) * nr * self.nq];
                    for i1 in 0..nr {
                        let a = &tab[i1 * self.nq..(i1 + 1) * self.nq];
                        for i2 in i1..nr {
                            let b = &tab[i2 * self.nq..(i2 + 1) * self.nq];
                            let v: f64 = a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w).sum();
                            mat[i1 * nr + i2] += v;
                        }
                    }
                }
            }
            kp += p;
        }
        for i1 in 0..nr {
            for i2 in 0..i1 {
                mat[i1 * nr + i2] = mat[i2 * nr + i1];
            }
        }
        mat.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
    }
}

/// Discretized `S_lambda^delta(L_A)` on `grid`.
pub fn br_operator<'g>(grid: &'g PolarGrid, params: &BRParams, method: Method) -> Result<AngularConvolution<'g>, LabError> {
    grid.check_resolution(params.lambda)?;
    let flux = params.flux;
    let gauge: Vec<Complex64> = grid.theta_nodes.iter().map(|&t| params.potential.gauge_factor(t)).collect();
    let gauge = if flux.m == 0 && params.potential.is_pure() { None } else { Some(gauge) };
    let reduced = BRParams::new(params.lambda, params.delta, AngularPotential::pure(flux.alpha0), params.tol)?;
    let op = match method {
        Method::Series => {
            let tables = RadialTables::new(grid, params.lambda, params.delta, flux.alpha0);
            let period = grid.ntheta();
            AngularConvolution::lazy(grid, true, Box::new(move |mode| Ok(tables.mode_matrix(mode, period))))
        }
        Method::Closed => closed_br_operator(grid, &reduced)?,
    };
    Ok(op.with_gauge(gauge))
}

fn closed_br_operator<'g>(grid: &'g PolarGrid, params: &BRParams) -> Result<AngularConvolution<'g>, LabError> {
    // Hermitian kernel: k(r2, r1, t) = conj(k(r1, r2, -t)); evaluate r1 <= r2 only.
    let n = grid.ntheta();
    let nr = grid.nr();
    let dts: Vec<f64> = (0..n).map(|m| if m * 2 > n { (m as f64 - n as f64) * grid.dtheta } else { m as f64 * grid.dtheta }).collect();
    let pairs: Vec<(usize, usize)> = (0..nr).flat_map(|i| (i..nr).map(move |k| (i, k))).collect();
    let rows: Vec<((usize, usize), Vec<Complex64>)> = pairs
        .par_iter()
        .map(|&(i1, i2)| Ok(((i1, i2), kernels::br_closed_angular_batch(grid.r_nodes[i1], grid.r_nodes[i2], &dts, params)?)))
        .collect::<Result<_, KernelError>>()?;
    let mut table = vec![Vec::new(); nr * nr];
    for ((i1, i2), vals) in rows {
        if i1 != i2 {
            table[i2 * nr + i1] = (0..n).map(|m| vals[(n - m) % n].conj()).collect();
        }
        table[i1 * nr + i2] = vals;
    }
    AngularConvolution::from_kernel(grid, true, false, |i1, i2, _| Ok(table[i1 * nr + i2].clone()))
}

/// `g(x) = sum_y S_lambda^delta(x, y) f(y) w_y`.
pub fn apply_br<'g>(f: &SampledFunction<'g>, params: &BRParams, method: Method) -> Result<SampledFunction<'g>, LabError> {
    br_operator(f.grid, params, method)?.apply(f)
}

// ---------------------------------------------------------------------------
// dyadic pieces

/// Discretized dyadic piece on `grid`.
pub fn piece_operator<'g>(grid: &'g PolarGrid, piece: &DyadicPiece) -> Result<AngularConvolution<'g>, LabError> {
    match piece.kind {
        PieceKind::G => AngularConvolution::from_kernel(grid, false, true, |i1, i2, dts| {
            Ok(piece.kernel_angular(grid.r_nodes[i1], grid.r_nodes[i2], dts)?)
        }),
        PieceKind::D1 => AngularConvolution::from_kernel(grid, true, true, |i1, i2, dts| {
            let v = piece.kernel_angular(grid.r_nodes[i1], grid.r_nodes[i2], &[0.0])?;
            Ok(vec![v[0]; dts.len()])
        }),
        _ => AngularConvolution::from_kernel(grid, true, true, |i1, i2, dts| {
            Ok(piece.kernel_angular(grid.r_nodes[i1], grid.r_nodes[i2], dts)?)
        }),
    }
}

// ---------------------------------------------------------------------------
// norms

/// Outcome of the power method on `T* T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerIteration {
    /// `||T v|| / ||v||` for the final iterate (a lower bound for `||T||`).
    pub estimate: f64,
    pub history: Vec<f64>,
    /// Relative change of the estimate over the last iteration.
    pub last_change: f64,
}

fn inner_norm(values: &[Complex64], weights: &[f64]) -> f64 {
    lp_norm_values(values, weights, 2.0)
}

/// Power method for `||T||_{2->2}` from a seeded random start.
pub fn power_iteration(op: &impl GridOperator, iterations: usize, seed: u64) -> Result<PowerIteration, LabError> {
    let grid = op.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..grid.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let mut history = Vec::with_capacity(iterations);
    for _ in 0..iterations.max(1) {
        let nv = inner_norm(&v, &grid.weights);
        if nv == 0.0 {
            history.push(0.0);
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let tv = op.apply_values(&v)?;
        let est = inner_norm(&tv, &grid.weights);
        if !est.is_finite() {
            return Err(LabError::NonFinite("power iteration".into()));
        }
        history.push(est);
        if est == 0.0 {
            break;
        }
        v = op.apply_adjoint_values(&tv)?;
    }
    let estimate = *history.last().unwrap_or(&0.0);
    let k = history.len();
    let last_change = if estimate == 0.0 {
        0.0
    } else if k < 2 {
        f64::INFINITY
    } else {
        (history[k - 1] - history[k - 2]).abs() / estimate
    };
    Ok(PowerIteration { estimate, history, last_change })
}

/// Largest `||T f||_p / ||f||_p` over `inputs`, with the index attaining it.
pub fn battery_ratio(op: &impl GridOperator, inputs: &[SampledFunction], p: f64) -> Result<(f64, usize), LabError> {
    let mut best = (0.0, 0);
    for (k, f) in inputs.iter().enumerate() {
        let nf = lp_norm(f, p)?;
        if nf == 0.0 {
            continue;
        }
        let r = lp_norm(&op.apply(f)?, p)? / nf;
        if r > best.0 {
            best = (r, k);
        }
    }
    Ok(best)
}

/// Inputs for `p != 2` at dyadic scale `2^j`: radial bumps, angular packets,
/// focusing phases `e^{-i|y - x0|}` on balls of radius `2^j`, and seeded random fields.
pub fn input_battery<'g>(grid: &'g PolarGrid, j: u32, trials: usize, seed: u64) -> Result<Vec<SampledFunction<'g>>, LabError> {
    let s = 2f64.powi(j as i32);
    let bump = |t: f64| if t.abs() < 1.0 { (1.0 - t * t).powi(3) } else { 0.0 };
    let mut out = Vec::new();
    for c in [0.5, 1.0, 1.5] {
        out.push(SampledFunction::from_fn(grid, |r, _| Complex64::new(bump((r - c * s) / (0.5 * s)), 0.0))?);
    }
    for k in [1.0, 4.0, 16.0] {
        out.push(SampledFunction::from_fn(grid, |r, t| Complex64::from_polar(bump((r - s) / (0.5 * s)), k * t))?);
    }
    for (cx, cy) in [(0.0, 0.0), (0.5 * s, 0.0), (0.0, 0.7 * s), (-0.6 * s, -0.3 * s)] {
        for sign in [-1.0, 1.0] {
            out.push(SampledFunction::from_fn(grid, |r, t| {
                let (x, y) = (r * t.cos() - cx, r * t.sin() - cy);
                let d = x.hypot(y);
                Complex64::from_polar(bump(d / (1.3 * s)), sign * d)
            })?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ j as u64);
    for _ in 0..trials {
        let vals = (0..grid.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        out.push(SampledFunction::new(grid, vals)?);
    }
    Ok(out)
}

/// Grid for the dyadic piece at scale `2^j`: radius `2^{j+1}`, node spacing
/// at most `spacing` in both directions.
pub fn dyadic_grid(j: u32, spacing: f64) -> Result<PolarGrid, LabError> {
    let radius = 2f64.powi(j as i32 + 1);
    let nr = (radius / spacing).ceil() as usize;
    let nt = ((TAU * radius / spacing).ceil() as usize).next_multiple_of(2);
    PolarGrid::new(nr, nt, radius)
}

/// Per-`j` norms of a dyadic piece and the fitted slope of `log2(norm)` against `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub piece: PieceKind,
    pub p: f64,
    pub delta: f64,
    pub alpha: f64,
    pub js: Vec<u32>,
    pub norms: Vec<f64>,
    pub slope: Option<f64>,
    /// `delta_c(p, 2) - delta`.
    pub predicted: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Settings of [`dyadic_norm_scaling`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingConfig {
    pub spacing: f64,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self { spacing: 0.5, trials: 2, seed: DEFAULT_SEED, tolerance: 0.15 }
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Empirical norms of `T^j` (power method for `p = 2`, input battery
/// otherwise) and the slope of `log2 ||T^j||` in `j`; passes when the slope is
/// at most `delta_c(p, 2) - delta + tolerance`.
pub fn dyadic_norm_scaling(
    kind: PieceKind,
    alpha: f64,
    delta: f64,
    p: f64,
    js: &[u32],
    cfg: &ScalingConfig,
) -> Result<ScalingReport, LabError> {
    if !(p == 2.0 || p > 4.0) {
        return Err(LabError::Invalid(format!("dyadic scaling covers p = 2 and p > 4 (got {p})")));
    }
    if js.iter().any(|&j| !(1..=7).contains(&j)) {
        return Err(LabError::Invalid(format!("j range {js:?} must lie in 1..=7")));
    }
    let predicted = critical_index(p, 2)? - delta;
    let mut norms = Vec::with_capacity(js.len());
    for &j in js {
        let piece = DyadicPiece::new(kind, j, delta, alpha)?;
        if kind != PieceKind::G && piece.flux.is_integer() {
            norms.push(0.0);
            continue;
        }
        let grid = dyadic_grid(j, cfg.spacing)?;
        let op = piece_operator(&grid, &piece)?;
        let norm = if p == 2.0 {
            power_iteration(&op, POWER_ITERATIONS, cfg.seed)?.estimate
        } else {
            battery_ratio(&op, &input_battery(&grid, j, cfg.trials, cfg.seed)?, p)?.0
        };
        norms.push(norm);
    }
    let all_zero = norms.iter().all(|&v| v == 0.0);
    let slope = if all_zero {
        None
    } else {
        let xs: Vec<f64> = js.iter().map(|&j| j as f64).collect();
        let ys: Vec<f64> = norms.iter().map(|v| v.log2()).collect();
        fit_slope(&xs, &ys)
    };
    let pass = match slope {
        None => all_zero,
        Some(s) => s.is_finite() && s <= predicted + cfg.tolerance,
    };
    Ok(ScalingReport { piece: kind, p, delta, alpha, js: js.to_vec(), norms, slope, predicted, tolerance: cfg.tolerance, pass })
}

// ---------------------------------------------------------------------------
// convergence experiments

/// Fixed catalog of test functions, all supported in the unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestFunction {
    /// Indicator of `r <= 1`.
    Disk,
    /// Indicator of `1/2 <= r <= 1`.
    Annulus,
    /// `exp(-4 r^2)`.
    Gaussian,
    /// `e^{3 i theta} (2r)^3 exp(-4 r^2)`.
    Packet,
}

impl TestFunction {
    pub fn eval(self, r: f64, theta: f64) -> Complex64 {
        let ind = |b: bool| Complex64::new(if b { 1.0 } else { 0.0 }, 0.0);
        match self {
            TestFunction::Disk => ind(r <= 1.0),
            TestFunction::Annulus => ind((0.5..=1.0).contains(&r)),
            TestFunction::Gaussian => Complex64::new((-4.0 * r * r).exp(), 0.0),
            TestFunction::Packet => Complex64::from_polar((2.0 * r).powi(3) * (-4.0 * r * r).exp(), 3.0 * theta),
        }
    }

    pub fn sample(self, grid: &PolarGrid) -> Result<SampledFunction<'_>, LabError> {
        SampledFunction::from_fn(grid, |r, t| self.eval(r, t))
    }
}

impl FromStr for TestFunction {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "disk" => Ok(TestFunction::Disk),
            "annulus" => Ok(TestFunction::Annulus),
            "gaussian" => Ok(TestFunction::Gaussian),
            "packet" => Ok(TestFunction::Packet),
            _ => Err(LabError::Invalid(format!("unknown test function {s:?} (expected disk, annulus, gaussian or packet)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergenceStatus {
    /// Errors decrease at every step and the fitted slope is below -0.05.
    Decreasing,
    /// Fitted slope at least -0.05.
    Stalled,
    /// Neither of the above.
    Inconclusive,
}

impl std::fmt::Display for ConvergenceStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConvergenceStatus::Decreasing => "decreasing",
            ConvergenceStatus::Stalled => "stalled",
            ConvergenceStatus::Inconclusive => "inconclusive",
        })
    }
}

/// `||S_lambda f - f||_p` over a list of `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub function: TestFunction,
    pub p: f64,
    pub delta: f64,
    pub alpha: f64,
    pub lambda_list: Vec<f64>,
    pub errors: Vec<f64>,
    /// Slope of `log error` against `log lambda`.
    pub slope: Option<f64>,
    pub status: ConvergenceStatus,
}

/// Slope below which a monotone error sequence counts as decreasing.
pub const STALL_SLOPE: f64 = -0.05;

/// Runs `S_lambda^delta` on `f` for each `lambda` on `grid` with flux `alpha`.
pub fn convergence_experiment(
    function: TestFunction,
    p: f64,
    delta: f64,
    alpha: f64,
    lambda_list: &[f64],
    grid: &PolarGrid,
    method: Method,
) -> Result<ConvergenceReport, LabError> {
    if !(p >= 1.0) || !(delta >= 0.0) || lambda_list.is_empty() {
        return Err(LabError::Invalid(format!("need p >= 1, delta >= 0 and a nonempty lambda list (got {p}, {delta})")));
    }
    for &lam in lambda_list {
        grid.check_resolution(lam)?;
    }
    let f = function.sample(grid)?;
    let mut errors = Vec::with_capacity(lambda_list.len());
    for &lam in lambda_list {
        let params = BRParams::pure(alpha, lam, delta)?;
        let g = apply_br(&f, &params, method)?;
        errors.push(lp_norm(&g.sub(&f), p)?);
    }
    let xs: Vec<f64> = lambda_list.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let slope = fit_slope(&xs, &ys);
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let status = match slope {
        Some(s) if monotone && s < STALL_SLOPE => ConvergenceStatus::Decreasing,
        Some(s) if s >= STALL_SLOPE => ConvergenceStatus::Stalled,
        _ => ConvergenceStatus::Inconclusive,
    };
    Ok(ConvergenceReport { function, p, delta, alpha, lambda_list: lambda_list.to_vec(), errors, slope, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_weights_sum_to_disk_area() {
        let g = PolarGrid::new(37, 20, 2.5).unwrap();
        let s: f64 = g.weights.iter().sum();
        assert!((s - PI * 2.5 * 2.5).abs() < 1e-12 * s);
    }
}
