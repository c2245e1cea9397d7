//! Fully nonlinear curvature operators built from elementary symmetric
//! functions of Hessian-type matrices,
//!
//! ```text
//! sigma_k(W) + alpha(x) sigma_{k-1}(W) = sum_{l=0}^{k-2} alpha_l(x) sigma_l(W),
//! ```
//!
//! together with the Gårding cone machinery that makes the equation elliptic
//! and concave on `Gamma_{k-1}`, a damped-Newton Dirichlet solver on planar
//! grids, an axisymmetric solver on spheres, and a batch verification harness
//! for the operator's algebraic structure (ellipticity, concavity,
//! Newton-MacLaurin bounds, trace bounds).

pub mod dirichlet;
pub mod expr;
pub mod linalg;
pub mod operator;
pub mod report;
pub mod sphere;
pub mod spectral;
pub mod symfun;
pub mod verify;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("symmetric function order {m} out of range for dimension {n}")]
    OrderOutOfRange { m: usize, n: usize },
    #[error("index {i} out of range for dimension {n}")]
    IndexOutOfRange { i: usize, n: usize },
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("sigma_{j} = {value:e} is not above margin {margin:e}: point is outside the Gamma_{j} cone")]
    Inadmissible { j: usize, value: f64, margin: f64 },
    #[error("sigma_{{k-1}} vanishes; quotient is singular")]
    SingularDenominator,
    #[error("jacobi eigensolver did not converge within the sweep cap")]
    EigenNoConvergence,
    #[error("discretization error: {0}")]
    Discretization(String),
    #[error("no admissible subsolution found before the amplitude cap")]
    NoSubsolution,
    #[error("newton line search stalled after {iterations} iterations (residual {residual:e})")]
    Stalled {
        iterations: usize,
        residual: f64,
        report: Box<report::SolveReport>,
    },
    #[error("initial iterate is not admissible: {0}")]
    InadmissibleStart(String),
    #[error(
        "shift condition b <= (n-1) a^2 / (2(n-2)) violated at sample {index}: discriminant {discriminant:e} < 0"
    )]
    CubicCondition { index: usize, discriminant: f64 },
    #[error("no positive root of the constant-coefficient equation below c_max = {c_max}")]
    RootNotFound { c_max: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
