//! Randomized certification of the algebraic structure of the operator:
//! cone sampling plus property suites (ellipticity, concavity, trace and
//! Newton-MacLaurin bounds, quotient concavity, the weighted concavity
//! inequality, and an analytic-vs-FD gradient check). Violations are data in
//! the report, not errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::operator::{
    check_admissible, g_ell_grad_lambda, g_ell_lambda, g_lambda, gii_lambda, sum_gii_lambda,
    PointCoeffs,
};
use crate::spectral::{eigen_sym, EigenPair, SymMatrix};
use crate::symfun::{cone_margin_raw, newton_maclaurin_bound, sigma_table};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Interior,
    NearBoundary,
    Ray,
}

/// A batch of spectra inside Gamma_j, with per-point margins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSample {
    pub points: Vec<Vec<f64>>,
    pub margins: Vec<f64>,
    pub j: usize,
    pub seed: u64,
    pub strategy: Strategy,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn interior_point(n: usize, j: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mu: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    let mut s = 0.0;
    loop {
        let lam: Vec<f64> = mu.iter().map(|v| v + s).collect();
        let norm = lam.iter().map(|v| v * v).sum::<f64>().sqrt();
        // keep interior samples a fixed relative distance from the cone
        // boundary; the near-boundary strategy covers the thin shell
        if cone_margin_raw(&lam, j) > 0.05 * (1.0 + norm) {
            return lam;
        }
        s += 0.25;
    }
}

/// Draws `count` spectra inside Gamma_j; deterministic in `seed`.
pub fn sample_cone(n: usize, j: usize, count: usize, strategy: Strategy, seed: u64) -> ConeSample {
    assert!(1 <= j && j <= n, "require 1 <= j <= n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    match strategy {
        Strategy::Interior => {
            for _ in 0..count {
                points.push(interior_point(n, j, &mut rng));
            }
        }
        Strategy::NearBoundary => {
            for _ in 0..count {
                let mu: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
                // s_hi safely interior, s_lo at or past the cone boundary
                let margin_at = |s: f64| {
                    let lam: Vec<f64> = mu.iter().map(|v| v + s).collect();
                    cone_margin_raw(&lam, j)
                };
                let mut hi = 0.0;
                while margin_at(hi) <= 1e-3 {
                    hi += 0.25;
                }
                let mut lo = hi;
                while margin_at(lo) > 1e-6 {
                    lo -= 0.25;
                }
                // bisect s until the margin lands in [1e-6, 1e-3]
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let m = margin_at(mid);
                    if m > 1e-3 {
                        hi = mid;
                    } else if m <= 1e-6 {
                        lo = mid;
                    } else {
                        hi = mid;
                        lo = mid;
                        break;
                    }
                }
                let s = 0.5 * (lo + hi);
                points.push(mu.iter().map(|v| v + s).collect());
            }
        }
        Strategy::Ray => {
            // fixed admissible directions, scaled by a random positive factor
            let mut dirs: Vec<Vec<f64>> = vec![vec![1.0; n]];
            for i in 0..n {
                let mut d = vec![1.0; n];
                d[i] = 2.0;
                dirs.push(d);
                let mut d = vec![1.0; n];
                d[i] = if j < n { -0.5 / n as f64 } else { 0.5 };
                if cone_margin_raw(&d, j) > 0.0 {
                    dirs.push(d);
                }
            }
            for _ in 0..count {
                let d = &dirs[rng.gen_range(0..dirs.len())];
                let t = rng.gen_range(-3.0..3.0f64).exp();
                points.push(d.iter().map(|v| v * t).collect());
            }
        }
    }
    let margins = points.iter().map(|p| cone_margin_raw(p, j)).collect();
    ConeSample { points, margins, j, seed, strategy }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Ellipticity,
    Concavity,
    QuotientConcavity,
    ConcavityInequality,
    NewtonMaclaurin,
    SumGii,
    GradientCheck,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Ellipticity,
        Suite::Concavity,
        Suite::QuotientConcavity,
        Suite::ConcavityInequality,
        Suite::NewtonMaclaurin,
        Suite::SumGii,
        Suite::GradientCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Ellipticity => "ellipticity",
            Suite::Concavity => "concavity",
            Suite::QuotientConcavity => "quotient_concavity",
            Suite::ConcavityInequality => "concavity_inequality",
            Suite::NewtonMaclaurin => "newton_maclaurin",
            Suite::SumGii => "sum_gii",
            Suite::GradientCheck => "gradient_check",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SuiteParams {
    pub n: usize,
    pub k: usize,
    pub count: usize,
    pub seed: u64,
}

/// Outcome of one suite run; `passed` means zero violations beyond tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub n: usize,
    pub k: usize,
    pub count: usize,
    pub seed: u64,
    pub violations: usize,
    /// Smallest slack seen (negative values are violations).
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

struct Tracker {
    violations: usize,
    worst_margin: f64,
    worst_point: Vec<f64>,
}

impl Tracker {
    fn new() -> Self {
        Self { violations: 0, worst_margin: f64::INFINITY, worst_point: Vec::new() }
    }

    /// Records the slack of one check; negative slack is a violation.
    fn record(&mut self, slack: f64, point: &[f64]) {
        if slack < self.worst_margin {
            self.worst_margin = slack;
            self.worst_point = point.to_vec();
        }
        if slack < 0.0 {
            self.violations += 1;
        }
    }

    fn finish(self, suite: Suite, p: &SuiteParams) -> SuiteReport {
        SuiteReport {
            suite: suite.name().to_string(),
            n: p.n,
            k: p.k,
            count: p.count,
            seed: p.seed,
            violations: self.violations,
            worst_margin: self.worst_margin,
            worst_point: self.worst_point,
            passed: self.violations == 0,
        }
    }
}

fn random_coeffs(k: usize, rng: &mut ChaCha8Rng) -> PointCoeffs {
    PointCoeffs {
        alpha: rng.gen_range(-1.0..1.0),
        alpha_l: (0..k - 1).map(|_| rng.gen_range(f64::EPSILON..=1.0)).collect(),
    }
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> EigenPair {
    let mut a = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            a.set_sym(i, j, normal(rng));
        }
    }
    eigen_sym(&a).expect("random symmetric matrix decomposes")
}

fn random_direction(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let mut x = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            x.set_sym(i, j, normal(rng));
        }
    }
    let norm = x.frobenius_norm();
    if norm > 0.0 {
        x = SymMatrix::zeros(n).add_scaled(1.0 / norm, &x);
    }
    x
}

/// Strict G evaluation at a matrix point (margin 0), used by FD probes.
fn g_at(w: &SymMatrix, k: usize, c: &PointCoeffs) -> Result<f64> {
    let pair = eigen_sym(w)?;
    let lambda = pair.spectrum.values();
    check_admissible(lambda, k, 0.0)?;
    Ok(g_lambda(lambda, k, c))
}

fn g_ell_at(w: &SymMatrix, k: usize, l: usize) -> Result<f64> {
    let pair = eigen_sym(w)?;
    let lambda = pair.spectrum.values();
    check_admissible(lambda, k, 0.0)?;
    Ok(g_ell_lambda(lambda, k, l))
}

/// Basis of symmetric-matrix coordinates: n diagonal units followed by the
/// off-diagonal units with 1 in both mirror slots.
fn sym_basis(n: usize) -> Vec<SymMatrix> {
    let mut basis = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let mut b = SymMatrix::zeros(n);
        b.set_sym(i, i, 1.0);
        basis.push(b);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut b = SymMatrix::zeros(n);
            b.set_sym(i, j, 1.0);
            basis.push(b);
        }
    }
    basis
}

/// Full FD Hessian of w -> G(W + sum_a t_a B_a) at t = 0; shrinks the step
/// until all probe points are admissible.
fn fd_hessian(w: &SymMatrix, k: usize, c: &PointCoeffs) -> Result<SymMatrix> {
    let n = w.dim();
    let basis = sym_basis(n);
    let d = basis.len();
    let mut h = 1e-4 * (1.0 + w.frobenius_norm());
    'step: for _ in 0..8 {
        let mut hess = SymMatrix::zeros(d);
        let g0 = match g_at(w, k, c) {
            Ok(v) => v,
            Err(_) => return Err(Error::Inadmissible { j: k - 1, value: 0.0, margin: 0.0 }),
        };
        for a in 0..d {
            for b in a..d
            {
                let probe = |sa: f64, sb: f64| {
                    g_at(&w.add_scaled(sa * h, &basis[a]).add_scaled(sb * h, &basis[b]), k, c)
                };
                let v = if a == b {
                    match (probe(1.0, 0.0), probe(-1.0, 0.0)) {
                        (Ok(gp), Ok(gm)) => (gp - 2.0 * g0 + gm) / (h * h),
                        _ => {
                            h *= 0.25;
                            continue 'step;
                        }
                    }
                } else {
                    match (probe(1.0, 1.0), probe(1.0, -1.0), probe(-1.0, 1.0), probe(-1.0, -1.0)) {
                        (Ok(gpp), Ok(gpm), Ok(gmp), Ok(gmm)) => {
                            (gpp - gpm - gmp + gmm) / (4.0 * h * h)
                        }
                        _ => {
                            h *= 0.25;
                            continue 'step;
                        }
                    }
                };
                hess.set_sym(a, b, v);
            }
        }
        return Ok(hess);
    }
    Err(Error::Inadmissible { j: k - 1, value: 0.0, margin: 0.0 })
}

/// Runs one property suite; deterministic in `params.seed`.
pub fn run_suite(suite: Suite, params: &SuiteParams) -> SuiteReport {
    let (n, k) = (params.n, params.k);
    assert!(2 <= k && k <= n);
    let mut aux = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e3779b97f4a7c15);
    let mut tracker = Tracker::new();
    let sample = sample_cone(n, k - 1, params.count, Strategy::Interior, params.seed);

    match suite {
        Suite::Ellipticity => {
            for lam in &sample.points {
                let c = random_coeffs(k, &mut aux);
                let gii = gii_lambda(lam, k, &c);
                let min = gii.iter().fold(f64::INFINITY, |a, &v| a.min(v));
                tracker.record(min + 1e-12, lam);
            }
        }
        Suite::Concavity => {
            for lam in &sample.points {
                let c = random_coeffs(k, &mut aux);
                let q = random_orthogonal(n, &mut aux);
                let w = q.rotate_back(lam);
                let (hess, g0) = match (fd_hessian(&w, k, &c), g_at(&w, k, &c)) {
                    (Ok(h), Ok(g)) => (h, g),
                    _ => continue,
                };
                let max_eig = eigen_sym(&hess)
                    .map(|p| p.spectrum.values()[0])
                    .unwrap_or(f64::INFINITY);
                let tol = 1e-6 * (1.0 + g0.abs());
                tracker.record(tol - max_eig, lam);
            }
        }
        Suite::QuotientConcavity => {
            // pure quotient sigma_k / sigma_{k-1}: directional second
            // differences along random symmetric directions
            let c0 = PointCoeffs { alpha: 0.0, alpha_l: vec![0.0; k - 1] };
            for lam in &sample.points {
                let q = random_orthogonal(n, &mut aux);
                let w = q.rotate_back(lam);
                let x = random_direction(n, &mut aux);
                let h = 1e-4 * (1.0 + w.frobenius_norm());
                let probe = (|| -> Result<f64> {
                    let g0 = g_at(&w, k, &c0)?;
                    let gp = g_at(&w.add_scaled(h, &x), k, &c0)?;
                    let gm = g_at(&w.add_scaled(-h, &x), k, &c0)?;
                    Ok((gp - 2.0 * g0 + gm) / (h * h))
                })();
                if let (Ok(d2), Ok(g0)) = (probe, g_at(&w, k, &c0)) {
                    let tol = 1e-6 * (1.0 + g0.abs());
                    tracker.record(tol - d2, lam);
                }
            }
        }
        Suite::ConcavityInequality => {
            // -G_l'' [X, X] >= -(1 + 1/(k+1-l)) G_l^{-1} (G_l'[X])^2
            for lam in &sample.points {
                let q = random_orthogonal(n, &mut aux);
                let w = q.rotate_back(lam);
                let x = random_direction(n, &mut aux);
                let h = 1e-4 * (1.0 + w.frobenius_norm());
                for l in 0..=k - 2 {
                    let terms = (|| -> Result<(f64, f64, f64)> {
                        let g0 = g_ell_at(&w, k, l)?;
                        let gp = g_ell_at(&w.add_scaled(h, &x), k, l)?;
                        let gm = g_ell_at(&w.add_scaled(-h, &x), k, l)?;
                        let d2 = (gp - 2.0 * g0 + gm) / (h * h);
                        // analytic first derivative, rotated and contracted
                        let pair = eigen_sym(&w)?;
                        let grad = pair.rotate_back(&g_ell_grad_lambda(
                            pair.spectrum.values(),
                            k,
                            l,
                        ));
                        let mut d1 = 0.0;
                        for i in 0..n {
                            for jj in 0..n {
                                d1 += grad.get(i, jj) * x.get(i, jj);
                            }
                        }
                        Ok((g0, d1, d2))
                    })();
                    if let Ok((g0, d1, d2)) = terms {
                        let lhs = -d2;
                        let rhs = -(1.0 + 1.0 / (k + 1 - l) as f64) * d1 * d1 / g0;
                        let scale = 1.0 + lhs.abs() + rhs.abs();
                        tracker.record(lhs - rhs + 1e-6 * scale, lam);
                    }
                }
            }
        }
        Suite::NewtonMaclaurin => {
            let bound = newton_maclaurin_bound(n, k);
            for lam in &sample.points {
                let table = sigma_table(lam);
                let lhs = table[k] * table[k - 2];
                let rhs = bound * table[k - 1] * table[k - 1];
                let scale = 1.0 + lhs.abs() + rhs.abs();
                tracker.record(rhs + 1e-12 * scale - lhs, lam);
            }
            // equality case at the identity spectrum
            let ones = vec![1.0; n];
            let table = sigma_table(&ones);
            let eq = newton_maclaurin_bound(n, k) * table[k - 1] * table[k - 1]
                - table[k] * table[k - 2];
            tracker.record(1e-12 - eq.abs(), &ones);
        }
        Suite::SumGii => {
            let bound = (n - k + 1) as f64 / k as f64;
            for lam in &sample.points {
                let mut c = random_coeffs(k, &mut aux);
                c.alpha_l.iter_mut().for_each(|a| *a -= f64::EPSILON); // allow 0
                let trace = sum_gii_lambda(lam, k, &c);
                tracker.record(trace - bound + 1e-10, lam);
            }
            // exact equality at the identity with vanishing alpha_l
            let ones = vec![1.0; n];
            let c0 = PointCoeffs { alpha: 0.0, alpha_l: vec![0.0; k - 1] };
            let eq = sum_gii_lambda(&ones, k, &c0) - bound;
            tracker.record(1e-12 - eq.abs(), &ones);
        }
        Suite::GradientCheck => {
            for lam in &sample.points {
                let c = random_coeffs(k, &mut aux);
                let q = random_orthogonal(n, &mut aux);
                let w = q.rotate_back(lam);
                let pair = match eigen_sym(&w) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                let grad = pair.rotate_back(&gii_lambda(pair.spectrum.values(), k, &c));
                let x = random_direction(n, &mut aux);
                let h = 1e-5 * (1.0 + w.frobenius_norm());
                let fd = match (g_at(&w.add_scaled(h, &x), k, &c), g_at(&w.add_scaled(-h, &x), k, &c)) {
                    (Ok(gp), Ok(gm)) => (gp - gm) / (2.0 * h),
                    _ => continue,
                };
                let mut analytic = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        analytic += grad.get(i, j) * x.get(i, j);
                    }
                }
                let scale = fd.abs().max(analytic.abs()).max(1e-6);
                let rel = (fd - analytic).abs() / scale;
                tracker.record(1e-6 - rel, lam);
            }
        }
    }
    tracker.finish(suite, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic() {
        for strategy in [Strategy::Interior, Strategy::NearBoundary, Strategy::Ray] {
            let a = sample_cone(4, 2, 50, strategy, 99);
            let b = sample_cone(4, 2, 50, strategy, 99);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn samples_lie_in_cone() {
        for j in 1..=4usize {
            for strategy in [Strategy::Interior, Strategy::NearBoundary, Strategy::Ray] {
                let s = sample_cone(4, j, 100, strategy, 7);
                for (lam, &m) in s.points.iter().zip(&s.margins) {
                    assert!(cone_margin_raw(lam, j) > 0.0, "{lam:?} outside Gamma_{j}");
                    assert!(m > 0.0);
                }
            }
        }
    }

    #[test]
    fn gamma_n_samples_are_positive() {
        let s = sample_cone(3, 3, 200, Strategy::Interior, 5);
        for lam in &s.points {
            assert!(lam.iter().all(|&v| v > 0.0), "{lam:?}");
        }
    }

    #[test]
    fn gamma_1_admits_negative_entries() {
        // Gamma_1 in n = 2 contains (-1/4, 1)-type points; interior sampling
        // must reach some of them
        let s = sample_cone(2, 1, 200, Strategy::Interior, 3);
        assert!(s
            .points
            .iter()
            .any(|lam| lam.iter().any(|&v| v < 0.0)));
        assert!(cone_margin_raw(&[1.0, -0.25], 1) > 0.0);
    }

    #[test]
    fn near_boundary_margins_in_band() {
        let s = sample_cone(5, 3, 100, Strategy::NearBoundary, 11);
        for &m in &s.margins {
            assert!((1e-6..=1e-3).contains(&m), "margin {m}");
        }
    }

    #[test]
    fn near_boundary_evaluation_never_nan() {
        // 1/sigma_{k-1} growth must surface as a large finite value or a
        // structured error, never NaN
        let s = sample_cone(4, 2, 200, Strategy::NearBoundary, 13);
        for lam in &s.points {
            match (|| -> Result<f64> {
                check_admissible(lam, 3, 0.0)?;
                Ok(g_ell_lambda(lam, 3, 0))
            })() {
                Ok(v) => assert!(!v.is_nan()),
                Err(Error::Inadmissible { .. }) => {}
                Err(e) => panic!("unexpected error {e:?}"),
            }
        }
    }

    #[test]
    fn all_suites_pass_smoke_counts() {
        for &(n, k) in &[(2usize, 2usize), (3, 2), (4, 3)] {
            let params = SuiteParams { n, k, count: 100, seed: 17 };
            for suite in Suite::ALL {
                let r = run_suite(suite, &params);
                assert!(
                    r.passed,
                    "{} failed at (n,k)=({n},{k}): worst {} at {:?}",
                    r.suite, r.worst_margin, r.worst_point
                );
            }
        }
    }

    #[test]
    fn report_round_trips_losslessly() {
        let r = run_suite(Suite::Ellipticity, &SuiteParams { n: 3, k: 2, count: 50, seed: 1 });
        let json = serde_json::to_string(&r).unwrap();
        let back: SuiteReport = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
