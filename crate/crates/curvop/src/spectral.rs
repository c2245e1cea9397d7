//! Symmetric eigendecomposition (cyclic Jacobi, sized for n <= 8) and
//! eigenvalue-coordinate derivative transport for sigma_m.

use crate::symfun::{deleted_sigma_table, Spectrum};
use crate::{Error, Result};

/// Dense symmetric matrix; storage keeps the symmetry exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    // row-major n x n, kept symmetric by construction
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = d[i];
        }
        m
    }

    /// Builds from row-major entries, symmetrizing (A + A^T)/2.
    pub fn from_rows(n: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), n * n);
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = 0.5 * (rows[i * n + j] + rows[j * n + i]);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets (i, j) and (j, i) together.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// self + s * other
    pub fn add_scaled(&self, s: f64, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + s * b)
            .collect();
        SymMatrix { n: self.n, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Spectrum plus the orthogonal frame whose columns are the matching
/// eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub spectrum: Spectrum,
    /// Row-major n x n; column j is the eigenvector for spectrum()[j].
    pub frame: Vec<f64>,
    n: usize,
}

impl EigenPair {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn frame_at(&self, i: usize, j: usize) -> f64 {
        self.frame[i * self.n + j]
    }

    /// Q diag(d) Q^T for a diagonal given in the eigenframe.
    pub fn rotate_back(&self, d: &[f64]) -> SymMatrix {
        let n = self.n;
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for s in 0..n {
                    acc += self.frame_at(i, s) * d[s] * self.frame_at(j, s);
                }
                m.set_sym(i, j, acc);
            }
        }
        m
    }
}

const MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigendecomposition; converges when the off-diagonal
/// Frobenius norm drops below 1e-14 * ||A||.
pub fn eigen_sym(a: &SymMatrix) -> Result<EigenPair> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.dim();
    let norm = a.frobenius_norm();
    let mut m = a.clone();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    if n > 1 {
        let tol = 1e-14 * norm.max(f64::MIN_POSITIVE);
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for r in p + 1..n {
                    off += m.get(p, r) * m.get(p, r);
                }
            }
            if (2.0 * off).sqrt() <= tol {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for r in p + 1..n {
                    let apq = m.get(p, r);
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m.get(p, p);
                    let aqq = m.get(r, r);
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // rotate rows/columns p, r; the 2x2 pivot block is set
                    // analytically below
                    for idx in 0..n {
                        if idx == p || idx == r {
                            continue;
                        }
                        let mip = m.get(idx, p);
                        let mir = m.get(idx, r);
                        m.set_sym(idx, p, c * mip - s * mir);
                        m.set_sym(idx, r, s * mip + c * mir);
                    }
                    let app2 = app - t * apq;
                    let aqq2 = aqq + t * apq;
                    m.set_sym(p, p, app2);
                    m.set_sym(r, r, aqq2);
                    m.set_sym(p, r, 0.0);
                    for idx in 0..n {
                        let qip = q[idx * n + p];
                        let qir = q[idx * n + r];
                        q[idx * n + p] = c * qip - s * qir;
                        q[idx * n + r] = s * qip + c * qir;
                    }
                }
            }
        }
        if !converged {
            return Err(Error::EigenNoConvergence);
        }
    }

    // sort descending, stable so repeated eigenvalues keep order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).expect("finite"));
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut frame = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            frame[row * n + col] = q[row * n + src];
        }
    }
    Ok(EigenPair {
        spectrum: Spectrum::new(values)?,
        frame,
        n,
    })
}

/// Matrix derivative of sigma_m(lambda(A)): diag(sigma_{m-1}(lambda | i)) in
/// the eigenframe, rotated back.
pub fn dsigma_da(a: &SymMatrix, m: usize) -> Result<SymMatrix> {
    let n = a.dim();
    if m == 0 || m > n {
        return Err(Error::OrderOutOfRange { m, n });
    }
    let pair = eigen_sym(a)?;
    let lambda = pair.spectrum.values();
    let d: Vec<f64> = (0..n)
        .map(|i| deleted_sigma_table(lambda, m - 1, i)[m - 1])
        .collect();
    Ok(pair.rotate_back(&d))
}
