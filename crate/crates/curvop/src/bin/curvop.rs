//! Command-line front end: verification suites, the planar Dirichlet solver,
//! the axisymmetric sphere solver, degeneracy sweeps, and the cubic
//! reduction. Problems are described by JSON configs whose coefficient and
//! boundary fields are arithmetic expressions over `x`, `y` (planar),
//! `theta` (spherical) and `eps` (sweeps).
//!
//! Exit codes: 0 on success (all suites pass / solve converged), 1 on suite
//! violations or non-convergence (the report is still written), 2 on config
//! errors.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use curvop::dirichlet::{self, DomainShape, Grid2D, ScalarField};
use curvop::expr::Expr;
use curvop::operator::{cubic_reduce, AlphaCoeff, Coeff, OperatorSpec};
use curvop::report::{SolveReport, SolverConfig};
use curvop::sphere::{self, AxisymField};
use curvop::verify::{run_suite, Suite, SuiteParams, SuiteReport};
use curvop::Error;

#[derive(Parser)]
#[command(name = "curvop", version, about = "Gårding-cone curvature operators: solvers and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites over random admissible-cone samples.
    Verify(VerifyArgs),
    /// Solve the planar Dirichlet problem described by a JSON config.
    SolveDirichlet(SolveArgs),
    /// Solve the axisymmetric sphere problem described by a JSON config.
    SolveSphere(SolveArgs),
    /// Solve a family of regularized sphere problems, warm-started.
    SweepDegenerate(SolveArgs),
    /// Shift away the sigma_2 and sigma_1 terms of a cubic equation.
    ReduceCubic(ReduceArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name (ellipticity, concavity, quotient_concavity,
    /// concavity_inequality, newton_maclaurin, sum_gii, gradient_check) or
    /// "all".
    #[arg(long, default_value = "all")]
    suite: String,
    /// Dimension/order pairs "n,k"; may repeat.
    #[arg(long = "nk", value_name = "N,K", num_args = 1.., default_values = ["3,2"])]
    nk: Vec<String>,
    /// Samples per suite per pair.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SolveArgs {
    /// JSON problem configuration.
    #[arg(long)]
    config: PathBuf,
    /// CSV dump of the solved field (or of the sweep rows).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Omit the timestamp so identical runs produce byte-identical reports.
    #[arg(long)]
    no_timestamp: bool,
}

// --- JSON configs -----------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorCfg {
    n: usize,
    k: usize,
    alpha: String,
    alpha_l: Vec<AlphaCfg>,
}

/// One right-hand-side coefficient: an expression, or the factorized
/// degenerate form { "g": expr, "p": power }.
#[derive(Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum AlphaCfg {
    Direct(String),
    Power { g: String, p: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainCfg {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    h: f64,
    #[serde(default = "default_shape")]
    shape: String,
}

fn default_shape() -> String {
    "rectangle".into()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DirichletCfg {
    domain: DomainCfg,
    operator: OperatorCfg,
    /// Boundary data phi(x, y).
    boundary: String,
    /// Initial iterate u0(x, y); defaults to the constructed subsolution.
    initial: Option<String>,
    #[serde(default)]
    solver: SolverOverrides,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereCfg {
    operator: OperatorCfg,
    /// Number of theta intervals.
    m: usize,
    /// Initial iterate u0(theta); defaults to the constant solution of the
    /// theta-averaged coefficients.
    initial: Option<String>,
    #[serde(default)]
    solver: SolverOverrides,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepCfg {
    /// Operator family; expressions may reference `theta` and `eps`.
    operator: OperatorCfg,
    eps: Vec<f64>,
    m: usize,
    #[serde(default)]
    solver: SolverOverrides,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverOverrides {
    tol: Option<f64>,
    max_iterations: Option<usize>,
    margin: Option<f64>,
    homotopy_steps: Option<usize>,
    min_step: Option<f64>,
}

impl SolverOverrides {
    fn apply(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.margin {
            cfg.margin = v;
        }
        if let Some(v) = self.homotopy_steps {
            cfg.homotopy_steps = v;
        }
        if let Some(v) = self.min_step {
            cfg.min_step = v;
        }
        cfg
    }
}

// --- JSON reports -----------------------------------------------------------

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    seed: u64,
    count: usize,
    suites: Vec<SuiteReport>,
    all_passed: bool,
}

#[derive(Serialize)]
struct RunReport {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    converged: bool,
    solve: SolveReport,
}

#[derive(Serialize)]
struct SweepRowReport {
    eps: f64,
    converged: bool,
    iterations: usize,
    sup_hessian: f64,
    h_diagnostic: f64,
    min_sigma: Vec<f64>,
}

#[derive(Serialize)]
struct SweepReport {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    converged: bool,
    rows: Vec<SweepRowReport>,
}

#[derive(Serialize)]
struct ReduceReport {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    s: f64,
    alpha_new: f64,
    gamma: f64,
    flipped: bool,
}

fn timestamp(out: &OutputArgs) -> Option<u64> {
    if out.no_timestamp {
        return None;
    }
    Some(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    )
}

fn write_report<T: Serialize>(out: &OutputArgs, report: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    match &out.report {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

// --- config -> operator -----------------------------------------------------

/// Compiles an expression over the named variables into a coefficient
/// callback, validating it once at the origin of the variable space.
fn compile(src: &str, names: &'static [&'static str]) -> Result<Coeff, Error> {
    let expr = Expr::parse(src)?;
    if expr.is_constant() {
        return Ok(Coeff::Const(expr.eval(&[], &[])?));
    }
    expr.eval(names, &vec![0.5; names.len()])
        .map_err(|e| Error::Config(format!("in expression '{src}': {e}")))?;
    Ok(Coeff::Fn(Arc::new(move |x: &[f64]| {
        expr.eval(names, x).unwrap_or(f64::NAN)
    })))
}

fn build_spec(cfg: &OperatorCfg, names: &'static [&'static str]) -> Result<OperatorSpec, Error> {
    if cfg.n < 2 || cfg.k < 2 || cfg.k > cfg.n {
        return Err(Error::Config(format!(
            "need 2 <= k <= n, got n = {}, k = {}",
            cfg.n, cfg.k
        )));
    }
    if cfg.alpha_l.len() != cfg.k - 1 {
        return Err(Error::Config(format!(
            "alpha_l must list k - 1 = {} coefficients, got {}",
            cfg.k - 1,
            cfg.alpha_l.len()
        )));
    }
    let alpha = compile(&cfg.alpha, names)?;
    let alpha_l = cfg
        .alpha_l
        .iter()
        .map(|a| {
            Ok(match a {
                AlphaCfg::Direct(src) => AlphaCoeff::Direct(compile(src, names)?),
                AlphaCfg::Power { g, p } => AlphaCoeff::Power { g: compile(g, names)?, p: *p },
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(OperatorSpec::new(cfg.n, cfg.k, alpha, alpha_l))
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn open_csv(path: &PathBuf) -> Result<std::fs::File, Error> {
    std::fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Constant-field start from the theta-averaged coefficients.
fn averaged_constant_start(spec: &OperatorSpec, m: usize) -> Result<AxisymField, Error> {
    let dt = std::f64::consts::PI / m as f64;
    let mut alpha = 0.0;
    let mut alpha_l = vec![0.0; spec.k - 1];
    for j in 0..=m {
        let c = spec.coeffs_at(&[j as f64 * dt]);
        alpha += c.alpha / (m + 1) as f64;
        for (l, a) in c.alpha_l.iter().enumerate() {
            alpha_l[l] += a / (m + 1) as f64;
        }
    }
    let c0 = sphere::constant_solution_root(spec.n, spec.k, alpha, &alpha_l, 1e6)?;
    Ok(AxisymField::constant(m, c0))
}

// --- commands ---------------------------------------------------------------

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode, Error> {
    let suites: Vec<Suite> = if args.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![args.suite.parse()?]
    };
    let mut pairs = Vec::new();
    for raw in &args.nk {
        let (n, k) = raw
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| Error::Config(format!("bad --nk value '{raw}', expected N,K")))?;
        if !(2..=6).contains(&n) || k < 2 || k > n {
            return Err(Error::Config(format!(
                "--nk {raw}: need 2 <= k <= n <= 6"
            )));
        }
        pairs.push((n, k));
    }
    let mut reports = Vec::new();
    for &(n, k) in &pairs {
        for &suite in &suites {
            let params = SuiteParams { n, k, count: args.count, seed: args.seed };
            let rep = run_suite(suite, &params);
            eprintln!(
                "{} (n={n}, k={k}): {} ({} violations, worst margin {:.3e})",
                rep.suite,
                if rep.passed { "pass" } else { "FAIL" },
                rep.violations,
                rep.worst_margin
            );
            reports.push(rep);
        }
    }
    let all_passed = reports.iter().all(|r| r.passed);
    let report = VerifyReport {
        command: "verify",
        timestamp: timestamp(&args.out),
        seed: args.seed,
        count: args.count,
        suites: reports,
        all_passed,
    };
    write_report(&args.out, &report)?;
    Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_solve_dirichlet(args: &SolveArgs) -> Result<ExitCode, Error> {
    let cfg: DirichletCfg = read_config(&args.config)?;
    let spec = build_spec(&cfg.operator, &["x", "y"])?;
    if spec.n != 2 {
        return Err(Error::Config("the planar solver discretizes n = 2".into()));
    }
    let shape = match cfg.domain.shape.as_str() {
        "rectangle" => DomainShape::Rectangle,
        "inscribed-disk" => DomainShape::InscribedDisk,
        other => return Err(Error::Config(format!("unknown domain shape '{other}'"))),
    };
    let grid = Grid2D::new(
        cfg.domain.x0,
        cfg.domain.x1,
        cfg.domain.y0,
        cfg.domain.y1,
        cfg.domain.h,
        shape,
    )?;
    let boundary = Expr::parse(&cfg.boundary)?;
    let phi = |x: f64, y: f64| boundary.eval(&["x", "y"], &[x, y]).unwrap_or(f64::NAN);
    let solver = cfg.solver.apply();
    let u0 = match &cfg.initial {
        Some(src) => {
            let e = Expr::parse(src)?;
            let mut f =
                ScalarField::from_fn(&grid, |x, y| e.eval(&["x", "y"], &[x, y]).unwrap_or(f64::NAN));
            // boundary nodes always carry phi exactly
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    if grid.kind(i, j) == curvop::dirichlet::NodeKind::Boundary {
                        let [x, y] = grid.pos(i, j);
                        f.set(i, j, phi(x, y));
                    }
                }
            }
            f
        }
        None => dirichlet::find_subsolution(&grid, &phi, &spec, solver.margin)?,
    };

    let (field, solve, code) = match dirichlet::newton_solve(&u0, &spec, &solver) {
        Ok((field, solve)) => (Some(field), solve, ExitCode::SUCCESS),
        Err(Error::Stalled { report, .. }) => (None, *report, ExitCode::from(1)),
        Err(e) => return Err(e),
    };
    let code = if solve.converged { code } else { ExitCode::from(1) };
    let report = RunReport {
        command: "solve-dirichlet",
        timestamp: timestamp(&args.out),
        converged: solve.converged,
        solve,
    };
    write_report(&args.out, &report)?;
    if let (Some(path), Some(field)) = (&args.csv, &field) {
        dirichlet::write_csv(field, &spec, &mut open_csv(path)?)?;
    }
    Ok(code)
}

fn sphere_csv(u: &AxisymField, spec: &OperatorSpec, out: &mut dyn std::io::Write) -> Result<(), Error> {
    let eigs = sphere::wu_eigs(u);
    let res = sphere::residual_field(u, spec);
    writeln!(out, "# curvop csv v1: theta,u,lambda_rad,lambda_tan,residual")
        .and_then(|_| writeln!(out, "theta,u,lambda_rad,lambda_tan,residual"))
        .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
    for j in 0..=u.m {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            u.theta(j),
            u.values[j],
            eigs[j].0,
            eigs[j].1,
            res[j]
        )
        .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
    }
    Ok(())
}

fn cmd_solve_sphere(args: &SolveArgs) -> Result<ExitCode, Error> {
    let cfg: SphereCfg = read_config(&args.config)?;
    let spec = build_spec(&cfg.operator, &["theta"])?;
    if cfg.m < 4 {
        return Err(Error::Config("need at least m = 4 intervals".into()));
    }
    let u0 = match &cfg.initial {
        Some(src) => {
            let e = Expr::parse(src)?;
            AxisymField::from_fn(cfg.m, |t| e.eval(&["theta"], &[t]).unwrap_or(f64::NAN))
        }
        None => averaged_constant_start(&spec, cfg.m)?,
    };
    let solver = cfg.solver.apply();
    let (field, solve, code) = match sphere::solve_axisym(&u0, &spec, &solver) {
        Ok((field, solve)) => (Some(field), solve, ExitCode::SUCCESS),
        Err(Error::Stalled { report, .. }) => (None, *report, ExitCode::from(1)),
        Err(e) => return Err(e),
    };
    let code = if solve.converged { code } else { ExitCode::from(1) };
    let report = RunReport {
        command: "solve-sphere",
        timestamp: timestamp(&args.out),
        converged: solve.converged,
        solve,
    };
    write_report(&args.out, &report)?;
    if let (Some(path), Some(field)) = (&args.csv, &field) {
        sphere_csv(field, &spec, &mut open_csv(path)?)?;
    }
    Ok(code)
}

fn cmd_sweep(args: &SolveArgs) -> Result<ExitCode, Error> {
    let cfg: SweepCfg = read_config(&args.config)?;
    if cfg.eps.is_empty() {
        return Err(Error::Config("eps list is empty".into()));
    }
    // validate the family once at a representative eps
    build_spec(&cfg.operator, &["theta", "eps"])?;
    let op = &cfg.operator;
    let make_spec = |eps: f64| -> OperatorSpec {
        let base = build_spec(op, &["theta", "eps"]).expect("validated above");
        let fix = |c: Coeff| -> Coeff {
            match c {
                Coeff::Const(v) => Coeff::Const(v),
                Coeff::Fn(f) => Coeff::Fn(Arc::new(move |x: &[f64]| f(&[x[0], eps]))),
            }
        };
        let alpha_l = base
            .alpha_l
            .into_iter()
            .map(|a| match a {
                AlphaCoeff::Direct(c) => AlphaCoeff::Direct(fix(c)),
                AlphaCoeff::Power { g, p } => AlphaCoeff::Power { g: fix(g), p },
            })
            .collect();
        OperatorSpec::new(base.n, base.k, fix(base.alpha), alpha_l)
    };
    let solver = cfg.solver.apply();
    let rows = sphere::degenerate_sweep(&make_spec, &cfg.eps, cfg.m, &solver)?;
    let converged = rows.iter().all(|r| r.report.converged);
    let report = SweepReport {
        command: "sweep-degenerate",
        timestamp: timestamp(&args.out),
        converged,
        rows: rows
            .iter()
            .map(|r| SweepRowReport {
                eps: r.eps,
                converged: r.report.converged,
                iterations: r.report.iterations,
                sup_hessian: r.report.sup_hessian,
                h_diagnostic: r.report.h_diagnostic,
                min_sigma: r.report.min_sigma.clone(),
            })
            .collect(),
    };
    write_report(&args.out, &report)?;
    if let Some(path) = &args.csv {
        let mut out = open_csv(path)?;
        let k = cfg.operator.k;
        writeln!(out, "# curvop csv v1: eps,sup_hessian,h_diagnostic,min_sigma{},iterations,converged", k - 1)
            .and_then(|_| writeln!(out, "eps,sup_hessian,h_diagnostic,min_sigma{},iterations,converged", k - 1))
            .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
        for r in &rows {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
                r.eps,
                r.report.sup_hessian,
                r.report.h_diagnostic,
                r.report.min_sigma[k - 2],
                r.report.iterations,
                r.report.converged
            )
            .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
        }
    }
    Ok(if converged { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_reduce(args: &ReduceArgs) -> Result<ExitCode, Error> {
    if args.n < 3 {
        return Err(Error::Config("cubic reduction needs n >= 3".into()));
    }
    let red = match cubic_reduce(&[args.a], &[args.b], &[args.c], args.n) {
        Ok(red) => red,
        Err(e @ Error::CubicCondition { .. }) => {
            eprintln!("{e}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e),
    };
    println!(
        "s = {}, alpha_new = {}, gamma = {}",
        red.s[0], red.alpha_new[0], red.gamma[0]
    );
    let report = ReduceReport {
        command: "reduce-cubic",
        timestamp: timestamp(&args.out),
        s: red.s[0],
        alpha_new: red.alpha_new[0],
        gamma: red.gamma[0],
        flipped: red.flipped[0],
    };
    if args.out.report.is_some() {
        write_report(&args.out, &report)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::SolveDirichlet(a) => cmd_solve_dirichlet(a),
        Command::SolveSphere(a) => cmd_solve_sphere(a),
        Command::SweepDegenerate(a) => cmd_sweep(a),
        Command::ReduceCubic(a) => cmd_reduce(a),
    };
    match result {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
