//! The curvature operator in undivided form
//! `F(W) = sigma_k + alpha sigma_{k-1} - sum_l alpha_l sigma_l`
//! and divided (quotient) form
//! `G(W) = sigma_k/sigma_{k-1} - sum_l alpha_l sigma_l/sigma_{k-1}`,
//! which is elliptic and concave on the Gamma_{k-1} cone. Also the
//! coefficient homotopy G_t, the analytic linearization G^{ij}, the
//! shift-tensor variant, and the cubic-to-quadratic reduction for
//! `sigma_3 + a sigma_2 + b sigma_1 + c = 0`.

use std::sync::Arc;

use crate::spectral::{eigen_sym, SymMatrix};
use crate::symfun::{binomial, cone_margin_raw, deleted_sigma_table, sigma_table};
use crate::{Error, Result};

/// A scalar coefficient field: constant or an analytic callback of position.
#[derive(Clone)]
pub enum Coeff {
    Const(f64),
    Fn(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl Coeff {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Fn(f) => f(x),
        }
    }
}

impl std::fmt::Debug for Coeff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coeff::Const(c) => write!(f, "Const({c})"),
            Coeff::Fn(_) => write!(f, "Fn(..)"),
        }
    }
}

/// One nonnegative right-hand-side coefficient alpha_l, either given directly
/// or in the factorized form g^p used by the degenerate estimates.
#[derive(Clone, Debug)]
pub enum AlphaCoeff {
    Direct(Coeff),
    /// alpha_l = g^p with g >= 0 and p >= k - l.
    Power { g: Coeff, p: f64 },
}

impl AlphaCoeff {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            AlphaCoeff::Direct(c) => c.eval(x),
            AlphaCoeff::Power { g, p } => g.eval(x).max(0.0).powf(*p),
        }
    }
}

/// Dimension, order and coefficient fields of one operator instance.
#[derive(Clone)]
pub struct OperatorSpec {
    pub n: usize,
    pub k: usize,
    /// sigma_{k-1} coefficient, sign-unrestricted.
    pub alpha: Coeff,
    /// alpha_0 .. alpha_{k-2}, nonnegative wherever sampled.
    pub alpha_l: Vec<AlphaCoeff>,
    /// Optional symmetric shift tensor chi(x), applied as sigma_m(chi + W).
    pub shift: Option<Arc<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>>,
}

impl std::fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("n", &self.n)
            .field("k", &self.k)
            .field("alpha", &self.alpha)
            .field("alpha_l", &self.alpha_l)
            .field("shift", &self.shift.as_ref().map(|_| "Fn(..)"))
            .finish()
    }
}

impl OperatorSpec {
    pub fn new(n: usize, k: usize, alpha: Coeff, alpha_l: Vec<AlphaCoeff>) -> Self {
        assert!(2 <= k && k <= n, "require 2 <= k <= n");
        assert_eq!(alpha_l.len(), k - 1, "need coefficients for l = 0..k-2");
        Self { n, k, alpha, alpha_l, shift: None }
    }

    pub fn with_shift(
        mut self,
        shift: Arc<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>,
    ) -> Self {
        self.shift = Some(shift);
        self
    }

    /// Constant-coefficient convenience constructor.
    pub fn constant(n: usize, k: usize, alpha: f64, alpha_l: Vec<f64>) -> Self {
        Self::new(
            n,
            k,
            Coeff::Const(alpha),
            alpha_l.into_iter().map(|v| AlphaCoeff::Direct(Coeff::Const(v))).collect(),
        )
    }

    pub fn coeffs_at(&self, x: &[f64]) -> PointCoeffs {
        PointCoeffs {
            alpha: self.alpha.eval(x),
            alpha_l: self.alpha_l.iter().map(|c| c.eval(x)).collect(),
        }
    }

    /// chi(x) + W when a shift tensor is present, otherwise W.
    pub fn shifted(&self, w: &SymMatrix, x: &[f64]) -> SymMatrix {
        match &self.shift {
            Some(chi) => chi(x).add_scaled(1.0, w),
            None => w.clone(),
        }
    }
}

/// Coefficient values sampled at one position.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCoeffs {
    pub alpha: f64,
    pub alpha_l: Vec<f64>,
}

impl PointCoeffs {
    /// Coefficients of the deformation operator G_t: alpha_l replaced by
    /// t alpha_l + (1 - t).
    pub fn homotopy(&self, t: f64) -> PointCoeffs {
        PointCoeffs {
            alpha: self.alpha,
            alpha_l: self.alpha_l.iter().map(|a| t * a + (1.0 - t)).collect(),
        }
    }
}

/// Default admissibility margin for quotient evaluations at W.
pub fn default_margin(w: &SymMatrix) -> f64 {
    1e-10 * w.frobenius_norm() + 1e-300
}

/// Checks lambda in Gamma_{k-1} with the given margin.
pub fn check_admissible(lambda: &[f64], k: usize, margin: f64) -> Result<()> {
    let table = sigma_table(lambda);
    for (j, &s) in table.iter().enumerate().take(k).skip(1) {
        if s <= margin {
            return Err(Error::Inadmissible { j, value: s, margin });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// lambda-space core (slot order preserved; no sorting required)
// ---------------------------------------------------------------------------

/// Undivided value sigma_k + alpha sigma_{k-1} - sum_l alpha_l sigma_l.
pub fn f_lambda(lambda: &[f64], k: usize, c: &PointCoeffs) -> f64 {
    let table = sigma_table(lambda);
    let mut v = table[k] + c.alpha * table[k - 1];
    for (l, &a) in c.alpha_l.iter().enumerate() {
        v -= a * table[l];
    }
    v
}

/// Quotient value sigma_k/sigma_{k-1} - sum_l alpha_l sigma_l/sigma_{k-1};
/// equals -alpha on exact solutions. Caller guarantees admissibility.
pub fn g_lambda(lambda: &[f64], k: usize, c: &PointCoeffs) -> f64 {
    let table = sigma_table(lambda);
    let mut num = table[k];
    for (l, &a) in c.alpha_l.iter().enumerate() {
        num -= a * table[l];
    }
    num / table[k - 1]
}

/// G_l(lambda) = -sigma_l / sigma_{k-1} for 0 <= l <= k-2.
pub fn g_ell_lambda(lambda: &[f64], k: usize, l: usize) -> f64 {
    let table = sigma_table(lambda);
    -table[l] / table[k - 1]
}

/// Eigenframe diagonal of the derivative of G. Assembled in the
/// cancellation-friendly deleted-index form
/// G^{ii} = [ (sigma_{k-1}(l|i)^2 - sigma_k(l|i) sigma_{k-2}(l|i))
///          - sum_l alpha_l (sigma_{l-1}(l|i) sigma_{k-1}(l|i)
///                           - sigma_l(l|i) sigma_{k-2}(l|i)) ] / sigma_{k-1}^2,
/// which equals the textbook quotient-rule expression identically.
pub fn gii_lambda(lambda: &[f64], k: usize, c: &PointCoeffs) -> Vec<f64> {
    let n = lambda.len();
    let table = sigma_table(lambda);
    let denom = table[k - 1] * table[k - 1];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let del = deleted_sigma_table(lambda, k, i);
        let mut num = del[k - 1] * del[k - 1] - del[k] * del[k - 2];
        for (l, &a) in c.alpha_l.iter().enumerate() {
            let s_lm1 = if l == 0 { 0.0 } else { del[l - 1] };
            num -= a * (s_lm1 * del[k - 1] - del[l] * del[k - 2]);
        }
        out.push(num / denom);
    }
    out
}

/// Eigenframe diagonal of the derivative of G_l = -sigma_l/sigma_{k-1}.
pub fn g_ell_grad_lambda(lambda: &[f64], k: usize, l: usize) -> Vec<f64> {
    let n = lambda.len();
    let table = sigma_table(lambda);
    let denom = table[k - 1] * table[k - 1];
    (0..n)
        .map(|i| {
            let del = deleted_sigma_table(lambda, k, i);
            let s_lm1 = if l == 0 { 0.0 } else { del[l - 1] };
            -(s_lm1 * del[k - 1] - del[l] * del[k - 2]) / denom
        })
        .collect()
}

/// Trace of the linearization; bounded below by (n-k+1)/k when alpha_l >= 0.
pub fn sum_gii_lambda(lambda: &[f64], k: usize, c: &PointCoeffs) -> f64 {
    gii_lambda(lambda, k, c).iter().sum()
}

/// G_0(I_n) with unit coefficients:
/// [binom(n,k) - sum_{l=0}^{k-2} binom(n,l)] / binom(n,k-1).
pub fn g0_identity_value(n: usize, k: usize) -> f64 {
    let mut num = binomial(n, k);
    for l in 0..=k - 2 {
        num -= binomial(n, l);
    }
    num / binomial(n, k - 1)
}

/// Deformation value G_t(lambda) = sigma_k/sigma_{k-1}
/// - sum_l (t alpha_l + 1 - t) sigma_l/sigma_{k-1} + t alpha - (1-t) G_0(I_n).
pub fn gt_lambda(lambda: &[f64], n: usize, k: usize, c: &PointCoeffs, t: f64) -> f64 {
    let ct = c.homotopy(t);
    let table = sigma_table(lambda);
    let mut num = table[k];
    for (l, &a) in ct.alpha_l.iter().enumerate() {
        num -= a * table[l];
    }
    num / table[k - 1] + t * c.alpha - (1.0 - t) * g0_identity_value(n, k)
}

// ---------------------------------------------------------------------------
// matrix-level operations
// ---------------------------------------------------------------------------

/// sigma_k + alpha sigma_{k-1} - sum alpha_l sigma_l at lambda(chi(x) + W).
/// Defined for every symmetric W.
pub fn eval_f(w: &SymMatrix, x: &[f64], spec: &OperatorSpec) -> Result<f64> {
    let m = spec.shifted(w, x);
    let pair = eigen_sym(&m)?;
    Ok(f_lambda(pair.spectrum.values(), spec.k, &spec.coeffs_at(x)))
}

/// Quotient form at lambda(chi(x) + W); errors if the point leaves
/// Gamma_{k-1} by more than `margin`.
pub fn eval_g(w: &SymMatrix, x: &[f64], spec: &OperatorSpec, margin: f64) -> Result<f64> {
    let m = spec.shifted(w, x);
    let pair = eigen_sym(&m)?;
    let lambda = pair.spectrum.values();
    check_admissible(lambda, spec.k, margin)?;
    Ok(g_lambda(lambda, spec.k, &spec.coeffs_at(x)))
}

/// Deformation operator G_t; t = 1 recovers eval_g + alpha, t = 0 the
/// unit-coefficient reference problem with G_t(I_n) = 0.
pub fn eval_gt(
    w: &SymMatrix,
    x: &[f64],
    spec: &OperatorSpec,
    t: f64,
    margin: f64,
) -> Result<f64> {
    let m = spec.shifted(w, x);
    let pair = eigen_sym(&m)?;
    let lambda = pair.spectrum.values();
    check_admissible(lambda, spec.k, margin)?;
    Ok(gt_lambda(lambda, spec.n, spec.k, &spec.coeffs_at(x), t))
}

/// Derivative matrix G^{ij} = dG/dW_ij, diagonal in the eigenframe of
/// chi(x) + W and rotated back. Positive semidefinite for alpha_l >= 0.
pub fn linearize(w: &SymMatrix, x: &[f64], spec: &OperatorSpec, margin: f64) -> Result<SymMatrix> {
    let m = spec.shifted(w, x);
    let pair = eigen_sym(&m)?;
    let lambda = pair.spectrum.values();
    check_admissible(lambda, spec.k, margin)?;
    let d = gii_lambda(lambda, spec.k, &spec.coeffs_at(x));
    Ok(pair.rotate_back(&d))
}

/// Trace of the linearization; >= (n-k+1)/k when alpha_l >= 0.
pub fn sum_gii(w: &SymMatrix, x: &[f64], spec: &OperatorSpec, margin: f64) -> Result<f64> {
    let m = spec.shifted(w, x);
    let pair = eigen_sym(&m)?;
    let lambda = pair.spectrum.values();
    check_admissible(lambda, spec.k, margin)?;
    Ok(sum_gii_lambda(lambda, spec.k, &spec.coeffs_at(x)))
}

/// Centered second difference [G(W+hX) - 2 G(W) + G(W-hX)] / h^2; all three
/// probe points must be admissible. Nonpositive up to discretization error by
/// concavity of G on Gamma_{k-1}.
pub fn concavity_probe(
    w: &SymMatrix,
    x: &[f64],
    spec: &OperatorSpec,
    dir: &SymMatrix,
    h: f64,
    margin: f64,
) -> Result<f64> {
    let g0 = eval_g(w, x, spec, margin)?;
    let gp = eval_g(&w.add_scaled(h, dir), x, spec, margin)?;
    let gm = eval_g(&w.add_scaled(-h, dir), x, spec, margin)?;
    Ok((gp - 2.0 * g0 + gm) / (h * h))
}

/// Pointwise output of the cubic reduction: the equation
/// sigma_3(lambda) + a sigma_2 + b sigma_1 + c = 0 in lambda = lam~ + s 1
/// becomes sigma_3(lam~) + alpha_new sigma_2(lam~) = gamma; where gamma < 0
/// the caller solves for -lam~ against -gamma instead (flipped = true).
#[derive(Clone, Debug, PartialEq)]
pub struct CubicReduction {
    pub s: Vec<f64>,
    pub alpha_new: Vec<f64>,
    pub gamma: Vec<f64>,
    pub flipped: Vec<bool>,
}

/// Reduces sigma_3 + a sigma_2 + b sigma_1 + c = 0 pointwise over sampled
/// coefficient fields, requiring b <= (n-1) a^2 / (2(n-2)). The shift s is
/// the larger root of ((n-1)(n-2)/2) s^2 + (n-1) a s + b = 0.
pub fn cubic_reduce(a: &[f64], b: &[f64], c: &[f64], n: usize) -> Result<CubicReduction> {
    assert!(n >= 3, "cubic reduction needs n >= 3");
    assert!(a.len() == b.len() && b.len() == c.len());
    let nf = n as f64;
    let quad = (nf - 1.0) * (nf - 2.0) / 2.0;
    let mut out = CubicReduction {
        s: Vec::with_capacity(a.len()),
        alpha_new: Vec::with_capacity(a.len()),
        gamma: Vec::with_capacity(a.len()),
        flipped: Vec::with_capacity(a.len()),
    };
    for idx in 0..a.len() {
        let (ai, bi, ci) = (a[idx], b[idx], c[idx]);
        let disc = (nf - 1.0) * (nf - 1.0) * ai * ai - 2.0 * (nf - 1.0) * (nf - 2.0) * bi;
        if disc < 0.0 {
            return Err(Error::CubicCondition { index: idx, discriminant: disc });
        }
        let s = (-(nf - 1.0) * ai + disc.sqrt()) / (2.0 * quad);
        let alpha_new = ai + (nf - 2.0) * s;
        let gamma = -(binomial(n, 3) * s.powi(3) + binomial(n, 2) * ai * s * s + nf * bi * s + ci);
        out.s.push(s);
        out.alpha_new.push(alpha_new);
        out.gamma.push(gamma);
        out.flipped.push(gamma < 0.0);
    }
    Ok(out)
}

/// Minimum over 1 <= j <= k-1 of sigma_j(lambda(chi + W)); the solver's
/// per-node admissibility margin.
pub fn admissibility_margin(w: &SymMatrix, x: &[f64], spec: &OperatorSpec) -> Result<f64> {
    let m = spec.shifted(w, x);
    let pair = eigen_sym(&m)?;
    Ok(cone_margin_raw(pair.spectrum.values(), spec.k - 1))
}
