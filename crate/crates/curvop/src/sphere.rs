//! Axisymmetric solver on the round sphere for the deformed Hessian
//! `W_u = Hess u + u g`. For u = u(theta) the eigenvalues are
//! `lambda_rad = u'' + u` (multiplicity 1) and
//! `lambda_tan = cot(theta) u' + u` (multiplicity n - 1).
//!
//! The difference stencils are trigonometrically corrected so that they are
//! exact on span{1, cos, sin}; cos(theta) is then an exact discrete null
//! direction of W_u, and the one-dimensional kernel of the linearization is
//! removed by a bordered system enforcing discrete L^2 orthogonality to it.

use nalgebra::{DMatrix, DVector};

use crate::operator::{f_lambda, g_lambda, gii_lambda, gt_lambda, OperatorSpec, PointCoeffs};
use crate::report::{SolveReport, SolverConfig};
use crate::symfun::{binomial, cone_margin_raw, sigma_table};
use crate::{Error, Result};

/// Grid function on theta_j = j pi / m, j = 0..=m.
#[derive(Clone, Debug)]
pub struct AxisymField {
    pub m: usize,
    pub values: Vec<f64>,
}

impl AxisymField {
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Self {
        assert!(m >= 4, "need at least 4 intervals");
        let dt = std::f64::consts::PI / m as f64;
        Self { m, values: (0..=m).map(|j| f(j as f64 * dt)).collect() }
    }

    pub fn constant(m: usize, c: f64) -> Self {
        Self::from_fn(m, |_| c)
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * std::f64::consts::PI / self.m as f64
    }

    pub fn dtheta(&self) -> f64 {
        std::f64::consts::PI / self.m as f64
    }
}

/// Eigenvalues (lambda_rad, lambda_tan) of W_u at every node. The poles use
/// the ghost symmetry u_{-1} = u_1 (resp. u_{m+1} = u_{m-1}), where both
/// eigenvalues coincide with the radial one.
pub fn wu_eigs(u: &AxisymField) -> Vec<(f64, f64)> {
    let m = u.m;
    let dt = u.dtheta();
    let d2w = 2.0 * (1.0 - dt.cos());
    let d1w = 2.0 * dt.sin();
    (0..=m)
        .map(|j| {
            let (um, up) = match j {
                0 => (u.values[1], u.values[1]),
                j if j == m => (u.values[m - 1], u.values[m - 1]),
                _ => (u.values[j - 1], u.values[j + 1]),
            };
            let uj = u.values[j];
            let d2 = (up - 2.0 * uj + um) / d2w;
            let rad = d2 + uj;
            if j == 0 || j == m {
                (rad, rad)
            } else {
                let theta = u.theta(j);
                let d1 = (up - um) / d1w;
                (rad, theta.tan().recip() * d1 + uj)
            }
        })
        .collect()
}

fn lambda_vec(n: usize, rad: f64, tan: f64) -> Vec<f64> {
    let mut lam = vec![tan; n];
    lam[0] = rad;
    lam
}

/// Pointwise undivided residual F over all nodes.
pub fn residual_field(u: &AxisymField, spec: &OperatorSpec) -> Vec<f64> {
    wu_eigs(u)
        .iter()
        .enumerate()
        .map(|(j, &(rad, tan))| {
            let lam = lambda_vec(spec.n, rad, tan);
            f_lambda(&lam, spec.k, &spec.coeffs_at(&[u.theta(j)]))
        })
        .collect()
}

/// Positive root of the constant-solution equation
/// `binom(n,k) c^k + alpha binom(n,k-1) c^{k-1} = sum_l alpha_l binom(n,l) c^l`
/// obtained by bracketing on (0, c_max] and bisection with a Newton polish.
pub fn constant_solution_root(
    n: usize,
    k: usize,
    alpha: f64,
    alpha_l: &[f64],
    c_max: f64,
) -> Result<f64> {
    assert_eq!(alpha_l.len(), k - 1);
    let phi = |c: f64| -> f64 {
        let mut v = binomial(n, k) * c.powi(k as i32) + alpha * binomial(n, k - 1) * c.powi(k as i32 - 1);
        for (l, &a) in alpha_l.iter().enumerate() {
            v -= a * binomial(n, l) * c.powi(l as i32);
        }
        v
    };
    let dphi = |c: f64| -> f64 {
        let mut v = k as f64 * binomial(n, k) * c.powi(k as i32 - 1)
            + (k as f64 - 1.0) * alpha * binomial(n, k - 1) * c.powi(k as i32 - 2);
        for (l, &a) in alpha_l.iter().enumerate().skip(1) {
            v -= a * l as f64 * binomial(n, l) * c.powi(l as i32 - 1);
        }
        v
    };
    // scan for the first sign change away from c = 0
    let samples = 4096;
    let mut lo = 0.0;
    let mut flo = phi(0.0);
    let mut bracket = None;
    for i in 1..=samples {
        let c = c_max * i as f64 / samples as f64;
        let fc = phi(c);
        if flo <= 0.0 && fc > 0.0 {
            bracket = Some((lo, c));
            break;
        }
        lo = c;
        flo = fc;
    }
    let (mut a, mut b) = bracket.ok_or(Error::RootNotFound { c_max })?;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if phi(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
        if b - a <= 1e-15 * (1.0 + b) {
            break;
        }
    }
    let mut c = 0.5 * (a + b);
    for _ in 0..5 {
        let d = dphi(c);
        if d.abs() > 0.0 {
            c -= phi(c) / d;
        }
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::RootNotFound { c_max });
    }
    Ok(c)
}

enum Mode {
    Plain,
    Homotopy(f64),
}

struct NodeState {
    lambda: Vec<f64>,
    res_g: f64,
    res_f: f64,
    sig_km1: f64,
    cone_margin: f64,
    lam_norm: f64,
}

/// Damped bordered Newton for the axisymmetric equation; same flow as the
/// planar solver, plus the one-dimensional first-harmonic handling. The
/// linearization annihilates cos(theta) exactly (the stencils are exact on
/// linear harmonics), so the solve is augmented by the scalar unknown mu in
/// `G + alpha + mu cos(theta) = 0` together with the discrete orthogonality
/// constraint `<u, cos>_w = 0`. Data without a first-harmonic defect yields
/// mu = 0 and the original equation; otherwise mu selects the solvable member
/// of the family alpha + mu cos (reported as `harmonic_multiplier`).
pub fn solve_axisym(
    u0: &AxisymField,
    spec: &OperatorSpec,
    cfg: &SolverConfig,
) -> Result<(AxisymField, SolveReport)> {
    let m = u0.m;
    let dt = u0.dtheta();
    let nodes = m + 1;
    let thetas: Vec<f64> = (0..=m).map(|j| j as f64 * dt).collect();
    let coeffs: Vec<PointCoeffs> = thetas.iter().map(|&t| spec.coeffs_at(&[t])).collect();
    let scale = coeffs
        .iter()
        .flat_map(|c| std::iter::once(c.alpha.abs()).chain(c.alpha_l.iter().map(|a| a.abs())))
        .fold(1.0f64, f64::max);
    let tol = cfg.tol * scale;
    // bordered weights: constraint row <u, cos>_w and kernel column cos
    let weight: Vec<f64> = thetas
        .iter()
        .map(|&t| t.cos() * t.sin().powi(spec.n as i32 - 1) * dt)
        .collect();
    let kernel: Vec<f64> = thetas.iter().map(|&t| t.cos()).collect();
    let orth = |u: &AxisymField| -> f64 {
        u.values.iter().zip(&weight).map(|(v, w)| v * w).sum()
    };

    let eval_states = |u: &AxisymField, mode: &Mode| -> Result<Vec<NodeState>> {
        wu_eigs(u)
            .iter()
            .enumerate()
            .map(|(j, &(rad, tan))| {
                let lam = lambda_vec(spec.n, rad, tan);
                if !lam.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite);
                }
                let c = &coeffs[j];
                let res_g = match mode {
                    Mode::Plain => g_lambda(&lam, spec.k, c) + c.alpha,
                    Mode::Homotopy(t) => gt_lambda(&lam, spec.n, spec.k, c, *t),
                };
                let table = sigma_table(&lam);
                Ok(NodeState {
                    res_f: f_lambda(&lam, spec.k, c),
                    res_g,
                    sig_km1: table[spec.k - 1],
                    cone_margin: cone_margin_raw(&lam, spec.k - 1),
                    lam_norm: lam.iter().map(|v| v * v).sum::<f64>().sqrt(),
                    lambda: lam,
                })
            })
            .collect()
    };
    let admissible = |states: &[NodeState]| {
        states
            .iter()
            .all(|s| s.cone_margin > cfg.margin * (1.0 + s.lam_norm))
    };
    // augmented residuals: the G-form one driven by Newton, and its
    // undivided counterpart F + mu sigma_{k-1} cos recorded in the history
    let sup_aug = |states: &[NodeState], mu: f64| {
        states
            .iter()
            .zip(&kernel)
            .map(|(s, c)| (s.res_g + mu * c).abs())
            .fold(0.0f64, f64::max)
    };
    let sup_f = |states: &[NodeState], mu: f64| {
        states
            .iter()
            .zip(&kernel)
            .map(|(s, c)| (s.res_f + mu * s.sig_km1 * c).abs())
            .fold(0.0f64, f64::max)
    };

    let mut u = u0.clone();
    let mut states = eval_states(&u, &Mode::Plain)?;
    if !admissible(&states) {
        let worst = states
            .iter()
            .map(|s| s.cone_margin)
            .fold(f64::INFINITY, f64::min);
        return Err(Error::InadmissibleStart(format!(
            "initial iterate has cone margin {worst:e}"
        )));
    }

    let mut mu = 0.0f64;
    let mut report = SolveReport {
        converged: false,
        iterations: 0,
        residual_history: vec![sup_f(&states, mu)],
        min_admissibility_margin: states
            .iter()
            .map(|s| s.cone_margin)
            .fold(f64::INFINITY, f64::min),
        sup_hessian: 0.0,
        h_diagnostic: 0.0,
        min_sigma: Vec::new(),
        orthogonality_residual: None,
        harmonic_multiplier: None,
        homotopy_used: false,
    };

    let d2w = 2.0 * (1.0 - dt.cos());
    let d1w = 2.0 * dt.sin();
    let mut mode = Mode::Plain;
    let mut rejected_full = 0usize;
    let mut homotopy_stage = 0usize;

    while report.iterations < cfg.max_iterations {
        if matches!(mode, Mode::Plain) && sup_f(&states, mu) <= tol && orth(&u).abs() <= tol {
            report.converged = true;
            break;
        }
        if let Mode::Homotopy(t) = mode {
            if sup_aug(&states, mu) <= tol {
                if t >= 1.0 {
                    mode = Mode::Plain;
                } else {
                    homotopy_stage += 1;
                    let tn = (homotopy_stage as f64 / cfg.homotopy_steps as f64).min(1.0);
                    mode = Mode::Homotopy(tn);
                }
                states = eval_states(&u, &mode)?;
                continue;
            }
        }

        // bordered Jacobian: [J, kernel; weight^T, 0]
        let mut jac = DMatrix::<f64>::zeros(nodes + 1, nodes + 1);
        let mut rhs = DVector::<f64>::zeros(nodes + 1);
        for j in 0..nodes {
            let c = match mode {
                Mode::Plain => coeffs[j].clone(),
                Mode::Homotopy(t) => coeffs[j].homotopy(t),
            };
            let gii = gii_lambda(&states[j].lambda, spec.k, &c);
            let g_rad = gii[0];
            let g_tan: f64 = gii[1..].iter().sum();
            rhs[j] = -(states[j].res_g + mu * kernel[j]);
            if j == 0 || j == m {
                // both eigenvalues are the radial one at the poles
                let gsum = g_rad + g_tan;
                let other = if j == 0 { 1 } else { m - 1 };
                jac[(j, j)] += gsum * (1.0 - 2.0 / d2w);
                jac[(j, other)] += gsum * 2.0 / d2w;
            } else {
                let cot = thetas[j].tan().recip();
                jac[(j, j)] += g_rad * (1.0 - 2.0 / d2w) + g_tan;
                jac[(j, j + 1)] += g_rad / d2w + g_tan * cot / d1w;
                jac[(j, j - 1)] += g_rad / d2w - g_tan * cot / d1w;
            }
            jac[(j, nodes)] = kernel[j];
            jac[(nodes, j)] = weight[j];
        }
        rhs[nodes] = -orth(&u);
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("bordered Jacobian is singular".into()))?;

        let res0 = sup_aug(&states, mu).max(orth(&u).abs());
        let mut step = 1.0;
        let mut accepted = None;
        while step >= cfg.min_step {
            let mut trial = u.clone();
            for j in 0..nodes {
                trial.values[j] += step * delta[j];
            }
            let trial_mu = mu + step * delta[nodes];
            if let Ok(trial_states) = eval_states(&trial, &mode) {
                let trial_res = sup_aug(&trial_states, trial_mu).max(orth(&trial).abs());
                if admissible(&trial_states) && trial_res <= (1.0 - 1e-4 * step) * res0 {
                    accepted = Some((trial, trial_states, trial_mu, step));
                    break;
                }
            }
            step *= 0.5;
        }

        match accepted {
            Some((trial, trial_states, trial_mu, step)) => {
                u = trial;
                states = trial_states;
                mu = trial_mu;
                report.iterations += 1;
                report.residual_history.push(sup_f(&states, mu));
                report.min_admissibility_margin = report.min_admissibility_margin.min(
                    states
                        .iter()
                        .map(|s| s.cone_margin)
                        .fold(f64::INFINITY, f64::min),
                );
                if step < 1.0 {
                    rejected_full += 1;
                } else {
                    rejected_full = 0;
                }
                if matches!(mode, Mode::Plain) && rejected_full >= 3 {
                    report.homotopy_used = true;
                    homotopy_stage = 0;
                    mode = Mode::Homotopy(0.0);
                    states = eval_states(&u, &mode)?;
                    rejected_full = 0;
                }
            }
            None => {
                if matches!(mode, Mode::Plain) {
                    report.homotopy_used = true;
                    homotopy_stage = 0;
                    mode = Mode::Homotopy(0.0);
                    states = eval_states(&u, &mode)?;
                    rejected_full = 0;
                } else {
                    finalize_report(&mut report, &states, spec, orth(&u), mu);
                    return Err(Error::Stalled {
                        iterations: report.iterations,
                        residual: sup_f(&states, mu),
                        report: Box::new(report),
                    });
                }
            }
        }
    }
    if !report.converged
        && matches!(mode, Mode::Plain)
        && sup_f(&states, mu) <= tol
        && orth(&u).abs() <= tol
    {
        report.converged = true;
    }
    let o = orth(&u);
    finalize_report(&mut report, &states, spec, o, mu);
    Ok((u, report))
}

fn finalize_report(
    report: &mut SolveReport,
    states: &[NodeState],
    spec: &OperatorSpec,
    orth: f64,
    mu: f64,
) {
    let n = spec.n;
    let mut min_sigma = vec![f64::INFINITY; n];
    let mut sup_hessian = 0.0f64;
    let mut h_diag = f64::NEG_INFINITY;
    for s in states {
        let table = sigma_table(&s.lambda);
        for j in 1..=n {
            min_sigma[j - 1] = min_sigma[j - 1].min(table[j]);
        }
        h_diag = h_diag.max(table[1]);
        sup_hessian = sup_hessian.max(s.lambda.iter().fold(0.0f64, |a, &l| a.max(l.abs())));
    }
    report.min_sigma = min_sigma;
    report.sup_hessian = sup_hessian;
    report.h_diagnostic = h_diag;
    report.orthogonality_residual = Some(orth.abs());
    report.harmonic_multiplier = Some(mu);
}

/// One row of a degeneracy sweep: the regularization strength and the solve
/// it produced.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub eps: f64,
    pub field: AxisymField,
    pub report: SolveReport,
}

/// Solves a family of regularized problems eps -> spec(eps), warm-starting
/// each run from the previous solution. The first run starts from the
/// constant solution of the theta-averaged coefficients.
pub fn degenerate_sweep(
    make_spec: &dyn Fn(f64) -> OperatorSpec,
    eps_list: &[f64],
    m: usize,
    cfg: &SolverConfig,
) -> Result<Vec<SweepRow>> {
    assert!(!eps_list.is_empty());
    let first = make_spec(eps_list[0]);
    let dt = std::f64::consts::PI / m as f64;
    let mut alpha_bar = 0.0;
    let mut alpha_l_bar = vec![0.0; first.k - 1];
    for j in 0..=m {
        let c = first.coeffs_at(&[j as f64 * dt]);
        alpha_bar += c.alpha / (m + 1) as f64;
        for (l, a) in c.alpha_l.iter().enumerate() {
            alpha_l_bar[l] += a / (m + 1) as f64;
        }
    }
    let c0 = constant_solution_root(first.n, first.k, alpha_bar, &alpha_l_bar, 1e6)?;
    let mut u = AxisymField::constant(m, c0);
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let spec = make_spec(eps);
        let (sol, report) = solve_axisym(&u, &spec, cfg)?;
        u = sol.clone();
        rows.push(SweepRow { eps, field: sol, report });
    }
    Ok(rows)
}
