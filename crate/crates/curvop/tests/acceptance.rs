//! End-to-end acceptance checks: one test per criterion, each printing a
//! single pass/fail line (run with `--nocapture` to see the passing lines).

use std::sync::Arc;
use std::time::Instant;

use curvop::dirichlet::{find_subsolution, newton_solve, Grid2D, DomainShape};
use curvop::operator::{cubic_reduce, sum_gii_lambda, AlphaCoeff, Coeff, OperatorSpec, PointCoeffs};
use curvop::report::SolverConfig;
use curvop::sphere::{constant_solution_root, degenerate_sweep, solve_axisym, AxisymField};
use curvop::symfun::sigma_table;
use curvop::verify::{run_suite, Suite, SuiteParams};
use curvop::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(name: &str, ok: bool, detail: String) {
    println!("criterion {name}: {}", if ok { "pass" } else { "FAIL" });
    assert!(ok, "criterion {name} failed: {detail}");
}

const PAIRS: [(usize, usize); 5] = [(2, 2), (3, 2), (3, 3), (4, 3), (5, 3)];

#[test]
fn acceptance_01_ellipticity_suite() {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for (n, k) in PAIRS {
        let rep = run_suite(Suite::Ellipticity, &SuiteParams { n, k, count: 100_000, seed: 11 });
        violations += rep.violations;
        worst = worst.min(rep.worst_margin);
    }
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        "01 ellipticity (5 x 1e5 samples)",
        violations == 0 && elapsed <= 120.0,
        format!("{violations} violations, worst margin {worst:e}, {elapsed:.1}s"),
    );
}

#[test]
fn acceptance_02_concavity_suite() {
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for (n, k) in PAIRS {
        let rep = run_suite(Suite::Concavity, &SuiteParams { n, k, count: 1_000, seed: 13 });
        violations += rep.violations;
        worst = worst.min(rep.worst_margin);
    }
    criterion(
        "02 concavity (FD Hessian, 1e3 samples)",
        violations == 0,
        format!("{violations} violations, worst margin {worst:e}"),
    );
}

#[test]
fn acceptance_03_newton_maclaurin() {
    let mut violations = 0;
    for (n, k) in PAIRS {
        let rep =
            run_suite(Suite::NewtonMaclaurin, &SuiteParams { n, k, count: 100_000, seed: 17 });
        violations += rep.violations;
    }
    // equality at the identity spectrum, checked directly
    let mut eq_ok = true;
    for (n, k) in PAIRS {
        let table = sigma_table(&vec![1.0; n]);
        let bound = (k - 1) as f64 * (n - k + 1) as f64 / (k as f64 * (n - k + 2) as f64);
        let margin = bound * table[k - 1] * table[k - 1] - table[k] * table[k - 2];
        eq_ok &= margin.abs() <= 1e-12;
    }
    criterion(
        "03 newton-maclaurin (1e5 samples + identity equality)",
        violations == 0 && eq_ok,
        format!("{violations} violations, identity equality ok = {eq_ok}"),
    );
}

#[test]
fn acceptance_04_trace_bound() {
    let mut violations = 0;
    for (n, k) in PAIRS {
        let rep = run_suite(Suite::SumGii, &SuiteParams { n, k, count: 10_000, seed: 19 });
        violations += rep.violations;
    }
    // equality case: n = k = 2, lambda = (1, 1), alpha_l = 0 gives exactly 1/2
    let c0 = PointCoeffs { alpha: 0.3, alpha_l: vec![0.0] };
    let trace = sum_gii_lambda(&[1.0, 1.0], 2, &c0);
    let eq_ok = trace == 0.5;
    criterion(
        "04 trace bound sum G^ii >= (n-k+1)/k",
        violations == 0 && eq_ok,
        format!("{violations} violations, equality trace = {trace}"),
    );
}

#[test]
fn acceptance_05_concavity_inequality() {
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for k in [3usize, 4] {
        let rep = run_suite(
            Suite::ConcavityInequality,
            &SuiteParams { n: 5, k, count: 1_000, seed: 23 },
        );
        violations += rep.violations;
        worst = worst.min(rep.worst_margin);
    }
    criterion(
        "05 concavity inequality (l = 0..k-2, k in {3,4}, n = 5)",
        violations == 0,
        format!("{violations} violations, worst margin {worst:e}"),
    );
}

#[test]
fn acceptance_06_example21_end_to_end() {
    let start = Instant::now();
    let exact = |x: f64, y: f64| -x * x / 8.0 + y * y / 2.0;
    let grid = Grid2D::new(-1.0, 1.0, -1.0, 1.0, 1.0 / 32.0, DomainShape::Rectangle).unwrap();
    let spec = OperatorSpec::constant(2, 2, 1.0, vec![0.5]);
    let mut cfg = SolverConfig::default();
    cfg.max_iterations = 200;
    let u0 = find_subsolution(&grid, &exact, &spec, cfg.margin).unwrap();
    let (u, report) = newton_solve(&u0, &spec, &cfg).unwrap();
    let mut max_err = 0.0f64;
    for &(i, j) in grid.interior() {
        let [x, y] = grid.pos(i, j);
        max_err = max_err.max((u.at(i, j) - exact(x, y)).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    criterion(
        "06 example 2.1 end-to-end (h = 1/32)",
        report.converged
            && max_err <= 1e-8
            && report.min_sigma[0] > 0.0
            && report.min_sigma[1] < 0.0
            && elapsed <= 30.0,
        format!(
            "converged {}, max err {max_err:e}, min sigma {:?}, {elapsed:.1}s",
            report.converged, report.min_sigma
        ),
    );
}

#[test]
fn acceptance_07_manufactured_convergence() {
    let exact = |x: f64, y: f64| ((x * x + y * y) / 2.0).exp();
    let alpha0 = |x: f64, y: f64| {
        let e = ((x * x + y * y) / 2.0).exp();
        let (uxx, uyy, uxy) = (e * (1.0 + x * x), e * (1.0 + y * y), e * x * y);
        (uxx * uyy - uxy * uxy) + (uxx + uyy)
    };
    let spec = OperatorSpec::new(
        2,
        2,
        Coeff::Const(1.0),
        vec![AlphaCoeff::Direct(Coeff::Fn(Arc::new(move |p: &[f64]| alpha0(p[0], p[1]))))],
    );
    let mut cfg = SolverConfig::default();
    cfg.max_iterations = 200;
    let mut errs = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let grid = Grid2D::new(-1.0, 1.0, -1.0, 1.0, h, DomainShape::Rectangle).unwrap();
        let u0 = find_subsolution(&grid, &exact, &spec, cfg.margin).unwrap();
        let (u, report) = newton_solve(&u0, &spec, &cfg).unwrap();
        assert!(report.converged, "h = {h}: {report:?}");
        let mut max_err = 0.0f64;
        for &(i, j) in grid.interior() {
            let [x, y] = grid.pos(i, j);
            max_err = max_err.max((u.at(i, j) - exact(x, y)).abs());
        }
        errs.push(max_err);
    }
    let r1 = errs[0] / errs[1];
    let r2 = errs[1] / errs[2];
    criterion(
        "07 manufactured convergence (h = 1/16 -> 1/64)",
        (3.2..=4.8).contains(&r1) && (3.2..=4.8).contains(&r2),
        format!("errors {errs:?}, ratios {r1:.2}, {r2:.2}"),
    );
}

#[test]
fn acceptance_08_gradient_check() {
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for (n, k) in PAIRS {
        let rep = run_suite(Suite::GradientCheck, &SuiteParams { n, k, count: 1_000, seed: 29 });
        violations += rep.violations;
        worst = worst.min(rep.worst_margin);
    }
    criterion(
        "08 gradient check (analytic vs FD, 1e3 samples)",
        violations == 0,
        format!("{violations} violations, worst margin {worst:e}"),
    );
}

#[test]
fn acceptance_09_sphere_constants() {
    let spec = OperatorSpec::constant(2, 2, 1.0, vec![1.0]);
    let c = constant_solution_root(2, 2, 1.0, &[1.0], 10.0).unwrap();
    let cfg = SolverConfig::default();
    // plain constant start away from the root
    let (u1, r1) = solve_axisym(&AxisymField::constant(64, 0.5), &spec, &cfg).unwrap();
    let err1 = u1.values.iter().fold(0.0f64, |a, &v| a.max((v - c).abs()));
    // perturbed start carrying a first-harmonic component
    let u0 = AxisymField::from_fn(64, |t| c + 0.3 * t.cos());
    let (u2, r2) = solve_axisym(&u0, &spec, &cfg).unwrap();
    let err2 = u2.values.iter().fold(0.0f64, |a, &v| a.max((v - c).abs()));
    let orth = r2.orthogonality_residual.unwrap();
    criterion(
        "09 sphere constant solutions (plain + perturbed starts)",
        r1.converged && r2.converged && err1 <= 1e-8 && err2 <= 1e-8 && orth <= 1e-10,
        format!("errors {err1:e}, {err2:e}, orthogonality {orth:e}"),
    );
}

#[test]
fn acceptance_10_degenerate_sweep() {
    let make_spec = |eps: f64| {
        OperatorSpec::new(
            2,
            2,
            Coeff::Const(0.0),
            vec![AlphaCoeff::Power {
                g: Coeff::Fn(Arc::new(move |x: &[f64]| eps + 0.5 * (1.0 - x[0].cos()))),
                p: 1.0,
            }],
        )
    };
    let eps_list = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let rows = degenerate_sweep(&make_spec, &eps_list, 64, &SolverConfig::default()).unwrap();
    let all_converged = rows.iter().all(|r| r.report.converged);
    let hs: Vec<f64> = rows.iter().map(|r| r.report.h_diagnostic).collect();
    let hmax = hs.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let hmin = hs.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    criterion(
        "10 degenerate sweep (eps 1e-1 .. 1e-6, sup H within 2x)",
        all_converged && hmax <= 2.0 * hmin,
        format!("converged {all_converged}, H range [{hmin:.4}, {hmax:.4}]"),
    );
}

#[test]
fn acceptance_11_cubic_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    let mut rejected_ok = true;
    for _ in 0..1_000 {
        let n = rng.gen_range(3..=5usize);
        let nf = n as f64;
        let a = rng.gen_range(-1.0..1.0);
        let bound = (nf - 1.0) * a * a / (2.0 * (nf - 2.0));
        let b = bound - rng.gen_range(0.0..2.0);
        let c = rng.gen_range(-1.0..1.0);
        let red = cubic_reduce(&[a], &[b], &[c], n).unwrap();
        let (s, alpha_new, gamma) = (red.s[0], red.alpha_new[0], red.gamma[0]);
        // reconstruct: sigma_3 + a sigma_2 + b sigma_1 + c at lambda = lam~ + s 1
        // must equal sigma_3(lam~) + alpha_new sigma_2(lam~) - gamma
        let lam_t: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lam: Vec<f64> = lam_t.iter().map(|v| v + s).collect();
        let t = sigma_table(&lam);
        let tt = sigma_table(&lam_t);
        let lhs = t[3] + a * t[2] + b * t[1] + c;
        let rhs = tt[3] + alpha_new * tt[2] - gamma;
        worst = worst.max((lhs - rhs).abs());
        // discriminant violations must raise the structured error
        let b_bad = bound + rng.gen_range(0.1..1.0);
        rejected_ok &= matches!(
            cubic_reduce(&[a], &[b_bad], &[c], n),
            Err(Error::CubicCondition { .. })
        );
    }
    criterion(
        "11 cubic reduction round trip (1e3 samples)",
        worst <= 1e-10 && rejected_ok,
        format!("worst residual {worst:e}, violations rejected = {rejected_ok}"),
    );
}
