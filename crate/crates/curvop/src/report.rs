//! Machine-readable solver output shared by the planar and spherical solvers.

use serde::{Deserialize, Serialize};

/// Trace and diagnostics of one nonlinear solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Sup norms of the undivided residual F, one entry per accepted iterate
    /// (the first entry is the initial iterate).
    pub residual_history: Vec<f64>,
    /// Min over nodes and iterations of min_{j <= k-1} sigma_j(lambda).
    pub min_admissibility_margin: f64,
    /// Sup norm over nodes of the discrete second-derivative matrix.
    pub sup_hessian: f64,
    /// Max over nodes of the trace diagnostic H (Delta u + n u on spheres,
    /// Delta u on domains).
    pub h_diagnostic: f64,
    /// Final-iterate min over nodes of sigma_j(lambda), for j = 1..n.
    /// Exposes admissible-but-not-Gamma_k solutions (e.g. min sigma_k < 0).
    pub min_sigma: Vec<f64>,
    /// Orthogonality residual of the bordered system (spheres only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub orthogonality_residual: Option<f64>,
    /// First-harmonic multiplier of the bordered system (spheres only): the
    /// equation is solved with alpha replaced by alpha + mu cos(theta), the
    /// unique member of that family orthogonal to the obstruction. Zero for
    /// data without a first-harmonic defect (e.g. constant or equatorially
    /// symmetric coefficients).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub harmonic_multiplier: Option<f64>,
    /// True if the solver fell back to the coefficient homotopy.
    pub homotopy_used: bool,
}

impl SolveReport {
    pub fn last_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::INFINITY)
    }
}

/// Configuration knobs shared by the damped-Newton solvers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the sup norm of F, scaled by the coefficient
    /// magnitude of the problem.
    pub tol: f64,
    pub max_iterations: usize,
    /// Cone-margin floor for every iterate.
    pub margin: f64,
    /// Number of homotopy stages when the plain Newton run stalls.
    pub homotopy_steps: usize,
    /// Smallest backtracking step factor before declaring a stall.
    pub min_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 60,
            margin: 1e-10,
            homotopy_steps: 8,
            min_step: 1.0 / (1u64 << 24) as f64,
        }
    }
}
