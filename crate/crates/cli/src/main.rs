//! `ab-riesz`: kernel evaluation, bound suites, convergence and scaling experiments.
//!
//! Exit codes: 0 pass, 1 suite failure, 2 config error, 3 computational error,
//! 4 grid resolution error.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use ab_riesz::ab_model::{AngularPotential, PolarPoint, TabulatedPotential};
use ab_riesz::dyadic_bounds::{self, BoundReport, DBoundGrid, FtConfig, IjGrid, PieceKind};
use ab_riesz::kernels::{self, BRParams, DEFAULT_TOL};
use ab_riesz::operator_lab::{self, LabError, Method, PolarGrid, ScalingConfig, TestFunction, DEFAULT_SEED};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{check, parse_grid, parse_j_range, parse_point, parse_seed, RunConfig};
use report::{num, opt_num, write_summary, Records};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Compute(String),
    Resolution(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Compute(_) => 3,
            CliError::Resolution(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::Compute(m) => write!(f, "computational error: {m}"),
            CliError::Resolution(m) => write!(f, "resolution error: {m}"),
        }
    }
}

fn compute<E: std::fmt::Display>(module: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Compute(format!("{module}: {e}"))
}

fn lab_error(e: LabError) -> CliError {
    match e {
        LabError::Resolution { .. } => CliError::Resolution(format!("operator_lab: {e}")),
        LabError::Invalid(m) => CliError::Config(m),
        other => CliError::Compute(format!("operator_lab: {other}")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "ab-riesz", version, about = "Bochner-Riesz kernels of the planar Aharonov-Bohm operator")]
struct Cli {
    /// TOML file with `[eval]`, `[verify]`, `[converge]`, `[scaling]`, `[output]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of randomized inputs (decimal or 0x hex).
    #[arg(long, global = true, value_parser = parse_seed)]
    seed: Option<u64>,
    /// CSV destination (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON summary destination.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the Bochner-Riesz kernel at one pair of points.
    Eval(EvalArgs),
    /// Run the dyadic bound suites.
    Verify(VerifyArgs),
    /// Measure ||S_lambda f - f||_p over a list of lambda.
    Converge(ConvergeArgs),
    /// Fit the growth of dyadic-piece norms in j.
    Scaling(ScalingArgs),
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// First point as "r,theta".
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// Second point as "r,theta".
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
    /// closed, series or both.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    /// Two-column file `theta, A(theta)` on a uniform grid; replaces --alpha.
    #[arg(long)]
    potential: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// b-integral, d-bound, ij-bound, ft-h, det, derivs or all.
    #[arg(long)]
    suite: Option<String>,
    /// "a..b" or a comma list.
    #[arg(long)]
    j_range: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    delta_list: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// disk, annulus, gaussian or packet.
    #[arg(long)]
    function: Option<String>,
    #[arg(long, value_delimiter = ',')]
    lambda_list: Option<Vec<f64>>,
    /// Radial x angular node counts, e.g. 256x256.
    #[arg(long)]
    grid: Option<String>,
    /// Radius of the computational disk.
    #[arg(long)]
    radius: Option<f64>,
    /// series or closed.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Debug, Args)]
struct ScalingArgs {
    /// G, D1, D2 or D3.
    #[arg(long)]
    piece: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    j_range: Option<String>,
    /// Random fields added to the input battery for p != 2.
    #[arg(long)]
    trials: Option<usize>,
    /// Largest node spacing of the dyadic grids.
    #[arg(long)]
    spacing: Option<f64>,
}

/// Shared run context after merging flags over the config file.
struct Run {
    seed: u64,
    out: Option<PathBuf>,
    summary: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("ab-riesz: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let output = cfg.output.unwrap_or_default();
    let ctx =
        Run { seed: cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED), out: cli.out.or(output.csv), summary: cli.summary.or(output.summary) };
    match cli.command {
        Command::Eval(a) => cmd_eval(a, cfg.eval.unwrap_or_default(), &ctx),
        Command::Verify(a) => cmd_verify(a, cfg.verify.unwrap_or_default(), &ctx),
        Command::Converge(a) => cmd_converge(a, cfg.converge.unwrap_or_default(), &ctx),
        Command::Scaling(a) => cmd_scaling(a, cfg.scaling.unwrap_or_default(), &ctx),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("AB_RIESZ_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("AB_RIESZ_THREADS: expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(format!("AB_RIESZ_THREADS: {e}")))
}

fn finish(records: &Records, ctx: &Run, summary: serde_json::Value) -> Result<(), CliError> {
    records.write(ctx.out.as_deref())?;
    write_summary(ctx.summary.as_deref(), &summary)
}

// ---------------------------------------------------------------------------
// eval

fn cmd_eval(a: EvalArgs, c: config::EvalConfig, ctx: &Run) -> Result<bool, CliError> {
    let delta = a.delta.or(c.delta).unwrap_or(0.5);
    let lambda = a.lambda.or(c.lambda).unwrap_or(1.0);
    let tol = a.tol.or(c.tol).unwrap_or(DEFAULT_TOL);
    let method = a.method.or(c.method).unwrap_or_else(|| "both".into());
    let (want_closed, want_series) = match method.as_str() {
        "closed" => (true, false),
        "series" => (false, true),
        "both" => (true, true),
        other => return Err(CliError::Config(format!("eval.method: expected closed, series or both, got {other:?}"))),
    };
    let xs = a.x.or(c.x).ok_or_else(|| CliError::Config("eval.x: required (\"r,theta\")".into()))?;
    let ys = a.y.or(c.y).ok_or_else(|| CliError::Config("eval.y: required (\"r,theta\")".into()))?;
    let (r1, t1) = parse_point("eval.x", &xs)?;
    let (r2, t2) = parse_point("eval.y", &ys)?;
    check("eval.delta", delta, delta >= 0.0 && delta.is_finite(), "must be finite and >= 0")?;
    check("eval.lambda", lambda, lambda > 0.0 && lambda.is_finite(), "must be finite and > 0")?;
    check("eval.tol", tol, tol > 0.0, "must be > 0")?;
    check("eval.x", r1, r1 > 0.0 && r1.is_finite() && t1.is_finite(), "radius must be finite and > 0")?;
    check("eval.y", r2, r2 > 0.0 && r2.is_finite() && t2.is_finite(), "radius must be finite and > 0")?;
    let potential_path = a.potential.or(c.potential);
    let potential = match &potential_path {
        Some(path) => {
            AngularPotential::Tabulated(TabulatedPotential::from_file(path).map_err(|e| CliError::Config(format!("eval.potential: {e}")))?)
        }
        None => {
            let alpha = a.alpha.or(c.alpha).unwrap_or(0.5);
            AngularPotential::pure(check("eval.alpha", alpha, alpha.is_finite(), "must be finite")?)
        }
    };
    let params = BRParams::new(lambda, delta, potential, tol).map_err(|e| CliError::Config(format!("eval: {e}")))?;
    let x = PolarPoint::new(r1, t1).map_err(|e| CliError::Config(format!("eval.x: {e}")))?;
    let y = PolarPoint::new(r2, t2).map_err(|e| CliError::Config(format!("eval.y: {e}")))?;

    let closed = want_closed.then(|| kernels::br_kernel_closed(&x, &y, &params)).transpose().map_err(compute("kernels"))?;
    let series = want_series.then(|| kernels::br_kernel_series(&x, &y, &params)).transpose().map_err(compute("kernels"))?;
    let diff = match (&closed, &series) {
        (Some(c), Some((s, _))) => Some((c.total - s).norm()),
        _ => None,
    };
    let mut rec = Records::new(&[
        "alpha",
        "delta",
        "lambda",
        "r1",
        "theta1",
        "r2",
        "theta2",
        "geometric_re",
        "geometric_im",
        "diffractive_re",
        "diffractive_im",
        "total_re",
        "total_im",
        "closed_error_estimate",
        "series_re",
        "series_im",
        "k_max_used",
        "series_tail_bound",
        "abs_difference",
    ]);
    let alpha = params.flux.alpha_total;
    rec.push(vec![
        num("alpha", alpha)?,
        num("delta", delta)?,
        num("lambda", lambda)?,
        num("r1", r1)?,
        num("theta1", t1)?,
        num("r2", r2)?,
        num("theta2", t2)?,
        opt_num("geometric_re", closed.map(|c| c.geometric.re))?,
        opt_num("geometric_im", closed.map(|c| c.geometric.im))?,
        opt_num("diffractive_re", closed.map(|c| c.diffractive.re))?,
        opt_num("diffractive_im", closed.map(|c| c.diffractive.im))?,
        opt_num("total_re", closed.map(|c| c.total.re))?,
        opt_num("total_im", closed.map(|c| c.total.im))?,
        opt_num("closed_error_estimate", closed.map(|c| c.error_estimate))?,
        opt_num("series_re", series.as_ref().map(|s| s.0.re))?,
        opt_num("series_im", series.as_ref().map(|s| s.0.im))?,
        series.as_ref().map(|s| s.1.k_max_used.to_string()).unwrap_or_default(),
        opt_num("series_tail_bound", series.as_ref().map(|s| s.1.tail_bound))?,
        opt_num("abs_difference", diff)?,
    ]);
    let summary = json!({
        "command": "eval",
        "alpha": alpha,
        "delta": delta,
        "lambda": lambda,
        "x": [r1, t1],
        "y": [r2, t2],
        "method": method,
        "tol": tol,
        "potential_file": potential_path,
        "closed": closed,
        "series": series.as_ref().map(|s| json!({"value": s.0, "diagnostics": s.1})),
        "abs_difference": diff,
    });
    finish(&rec, ctx, summary)?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// verify

const SUITES: [&str; 6] = ["b-integral", "d-bound", "ij-bound", "ft-h", "det", "derivs"];
const VERIFY_SAMPLES: usize = 100;
const B_INTEGRAL_ANGLES: usize = 200;

fn cmd_verify(a: VerifyArgs, c: config::VerifyConfig, ctx: &Run) -> Result<bool, CliError> {
    let suite = a.suite.or(c.suite).unwrap_or_else(|| "all".into());
    let selected: Vec<&str> = match suite.as_str() {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        other => return Err(CliError::Config(format!("verify.suite: expected one of {SUITES:?} or all, got {other:?}"))),
    };
    let js = match a.j_range.or(c.j_range) {
        Some(s) => parse_j_range("verify.j_range", &s)?,
        None => (2..=8).collect(),
    };
    if js.iter().any(|&j| j > 30) {
        return Err(CliError::Config(format!("verify.j_range: j must be at most 30 (got {js:?})")));
    }
    let alpha_list = a.alpha_list.or(c.alpha_list);
    let delta_list = a.delta_list.or(c.delta_list);
    for &al in alpha_list.iter().flatten() {
        check("verify.alpha_list", al, al.is_finite(), "entries must be finite")?;
    }
    for &d in delta_list.iter().flatten() {
        check("verify.delta_list", d, d >= 0.0 && d.is_finite(), "entries must be finite and >= 0")?;
    }
    let alphas = |default: &[f64]| alpha_list.clone().unwrap_or_else(|| default.to_vec());
    let deltas = |default: &[f64]| delta_list.clone().unwrap_or_else(|| default.to_vec());
    let dy = compute("dyadic_bounds");

    let mut reports: Vec<BoundReport> = Vec::new();
    let mut flatness = Vec::new();
    for s in &selected {
        match *s {
            "b-integral" => {
                for al in alphas(&[0.3, 0.5, -0.49]) {
                    reports.push(dyadic_bounds::b_integral_suite(al, B_INTEGRAL_ANGLES).map_err(&dy)?);
                }
            }
            "d-bound" => {
                let grid = DBoundGrid::default();
                for al in alphas(&[0.3, 0.5]) {
                    for d in deltas(&[0.0, 0.5]) {
                        for ell in [1u8, 2] {
                            let suite = dyadic_bounds::d_bound_suite(ell, &js, al, d, &grid).map_err(&dy)?;
                            flatness.push((ell, al, d, suite.flatness, suite.pass));
                            reports.extend(suite.reports);
                        }
                    }
                }
            }
            "ij-bound" => reports.push(dyadic_bounds::verify_ij_bound(&IjGrid { js: js.clone(), ..IjGrid::default() }).map_err(&dy)?),
            "ft-h" => {
                for al in alphas(&[0.5]) {
                    for d in deltas(&[0.25]) {
                        let cfg = FtConfig { alpha: al, delta: d, ..FtConfig::default() };
                        let (low, high) = dyadic_bounds::fourier_suite(&js, &dyadic_bounds::default_ft_pairs(), &cfg).map_err(&dy)?;
                        reports.push(low);
                        reports.push(high);
                    }
                }
            }
            "det" => reports.push(dyadic_bounds::verify_det(VERIFY_SAMPLES, ctx.seed).map_err(&dy)?),
            "derivs" => reports.push(dyadic_bounds::verify_derivatives(VERIFY_SAMPLES, ctx.seed).map_err(&dy)?),
            _ => unreachable!(),
        }
    }

    let mut rec = Records::new(&["suite", "j", "ell", "alpha", "delta", "sup_ratio", "ceiling", "pass", "argmax", "grid"]);
    for r in &reports {
        let argmax: Vec<String> = r.argmax_point.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
        rec.push(vec![
            r.suite.clone(),
            r.j.map(|j| j.to_string()).unwrap_or_default(),
            r.ell.map(|l| l.to_string()).unwrap_or_default(),
            opt_num("alpha", r.alpha)?,
            opt_num("delta", r.delta)?,
            num("sup_ratio", r.sup_ratio)?,
            num("ceiling", r.ceiling)?,
            r.pass.to_string(),
            argmax.join(" "),
            r.grid_spec.clone(),
        ]);
    }
    for &(ell, al, d, flat, pass) in &flatness {
        rec.push(vec![
            "d-bound-flatness".into(),
            String::new(),
            ell.to_string(),
            num("alpha", al)?,
            num("delta", d)?,
            num("flatness", flat)?,
            num("ceiling", dyadic_bounds::ceilings::FLATNESS)?,
            pass.to_string(),
            String::new(),
            format!("max_j sup / min_j sup over j in {js:?}"),
        ]);
    }
    let pass = reports.iter().all(|r| r.pass) && flatness.iter().all(|f| f.4);
    let summary = json!({
        "command": "verify",
        "suites": selected,
        "j_range": js,
        "seed": ctx.seed,
        "reports": reports,
        "flatness": flatness.iter().map(|f| json!({"ell": f.0, "alpha": f.1, "delta": f.2, "flatness": f.3, "pass": f.4})).collect::<Vec<_>>(),
        "pass": pass,
    });
    finish(&rec, ctx, summary)?;
    eprintln!("verify: {} ({} reports)", if pass { "PASS" } else { "FAIL" }, reports.len() + flatness.len());
    Ok(pass)
}

// ---------------------------------------------------------------------------
// converge and scaling

const EXPERIMENT_HEADER: [&str; 7] = ["experiment", "p", "delta", "lambda_or_j", "value", "slope", "status"];

fn parse_p(field: &str, p: f64) -> Result<f64, CliError> {
    check(field, p, p >= 1.0, "must be >= 1 (inf allowed)")
}

fn cmd_converge(a: ConvergeArgs, c: config::ConvergeConfig, ctx: &Run) -> Result<bool, CliError> {
    let p = parse_p("converge.p", a.p.or(c.p).unwrap_or(2.0))?;
    let delta = a.delta.or(c.delta).unwrap_or(0.0);
    check("converge.delta", delta, delta >= 0.0 && delta.is_finite(), "must be finite and >= 0")?;
    let alpha = a.alpha.or(c.alpha).unwrap_or(0.5);
    check("converge.alpha", alpha, alpha.is_finite(), "must be finite")?;
    let function: TestFunction = a
        .function
        .or(c.function)
        .unwrap_or_else(|| "gaussian".into())
        .parse()
        .map_err(|e: LabError| CliError::Config(format!("converge.function: {e}")))?;
    let lambdas = a.lambda_list.or(c.lambda_list).unwrap_or_else(|| vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    if lambdas.is_empty() {
        return Err(CliError::Config("converge.lambda_list: must not be empty".into()));
    }
    for &l in &lambdas {
        check("converge.lambda_list", l, l > 0.0 && l <= 16.0, "entries must lie in (0, 16]")?;
    }
    let (nr, nt) = parse_grid("converge.grid", &a.grid.or(c.grid).unwrap_or_else(|| "256x256".into()))?;
    let radius = a.radius.or(c.radius).unwrap_or(2.0);
    check("converge.radius", radius, radius > 0.0 && radius.is_finite(), "must be finite and > 0")?;
    let method: Method = a
        .method
        .or(c.method)
        .unwrap_or_else(|| "series".into())
        .parse()
        .map_err(|e: LabError| CliError::Config(format!("converge.method: {e}")))?;
    let grid = PolarGrid::new(nr, nt, radius).map_err(|e| CliError::Config(format!("converge.grid: {e}")))?;
    let report = operator_lab::convergence_experiment(function, p, delta, alpha, &lambdas, &grid, method).map_err(lab_error)?;

    let mut rec = Records::new(&EXPERIMENT_HEADER);
    let name = format!("converge-{}", format!("{function:?}").to_lowercase());
    let p_cell = if p.is_infinite() { "inf".to_string() } else { num("p", p)? };
    for (l, e) in report.lambda_list.iter().zip(&report.errors) {
        rec.push(vec![
            name.clone(),
            p_cell.clone(),
            num("delta", delta)?,
            num("lambda", *l)?,
            num("error", *e)?,
            String::new(),
            String::new(),
        ]);
    }
    let last = *report.errors.last().unwrap_or(&0.0);
    rec.push(vec![
        format!("{name}-summary"),
        p_cell,
        num("delta", delta)?,
        String::new(),
        num("error", last)?,
        opt_num("slope", report.slope)?,
        report.status.to_string(),
    ]);
    let summary = json!({
        "command": "converge",
        "grid": {"nr": nr, "ntheta": nt, "radius": radius},
        "method": method,
        "critical_index": operator_lab::critical_index(p, 2).map_err(lab_error)?,
        "report": report,
    });
    finish(&rec, ctx, summary)?;
    eprintln!("converge: status {}, slope {:?}", report.status, report.slope);
    Ok(true)
}

fn cmd_scaling(a: ScalingArgs, c: config::ScalingConfig, ctx: &Run) -> Result<bool, CliError> {
    let piece: PieceKind =
        a.piece.or(c.piece).unwrap_or_else(|| "G".into()).parse().map_err(|e| CliError::Config(format!("scaling.piece: {e}")))?;
    let p = parse_p("scaling.p", a.p.or(c.p).unwrap_or(2.0))?;
    if !(p == 2.0 || p > 4.0) {
        return Err(CliError::Config(format!("scaling.p: must be 2 or > 4 (got {p})")));
    }
    let delta = a.delta.or(c.delta).unwrap_or(0.5);
    check("scaling.delta", delta, delta >= 0.0 && delta.is_finite(), "must be finite and >= 0")?;
    let alpha = a.alpha.or(c.alpha).unwrap_or(0.5);
    check("scaling.alpha", alpha, alpha.is_finite(), "must be finite")?;
    let js = match a.j_range.or(c.j_range) {
        Some(s) => parse_j_range("scaling.j_range", &s)?,
        None => (1..=4).collect(),
    };
    if js.iter().any(|&j| !(1..=7).contains(&j)) {
        return Err(CliError::Config(format!("scaling.j_range: entries must lie in 1..=7 (got {js:?})")));
    }
    let defaults = ScalingConfig::default();
    let spacing = a.spacing.or(c.spacing).unwrap_or(defaults.spacing);
    check("scaling.spacing", spacing, spacing > 0.0 && spacing <= 1.0, "must lie in (0, 1]")?;
    let cfg =
        ScalingConfig { spacing, trials: a.trials.or(c.trials).unwrap_or(defaults.trials), seed: ctx.seed, tolerance: defaults.tolerance };
    let report = operator_lab::dyadic_norm_scaling(piece, alpha, delta, p, &js, &cfg).map_err(lab_error)?;

    let mut rec = Records::new(&EXPERIMENT_HEADER);
    let name = format!("scaling-{piece:?}");
    let p_cell = if p.is_infinite() { "inf".to_string() } else { num("p", p)? };
    for (j, n) in report.js.iter().zip(&report.norms) {
        rec.push(vec![name.clone(), p_cell.clone(), num("delta", delta)?, j.to_string(), num("norm", *n)?, String::new(), String::new()]);
    }
    let status = if report.pass { "pass" } else { "fail" };
    rec.push(vec![
        format!("{name}-summary"),
        p_cell,
        num("delta", delta)?,
        String::new(),
        num("predicted", report.predicted)?,
        opt_num("slope", report.slope)?,
        status.into(),
    ]);
    let summary = json!({ "command": "scaling", "config": cfg, "report": report });
    finish(&rec, ctx, summary)?;
    eprintln!("scaling: slope {:?}, bound {} + {}: {}", report.slope, report.predicted, report.tolerance, status);
    Ok(report.pass)
}
