//! Banded LU with partial pivoting, for the finite-difference Jacobians.
//! Storage and elimination follow the LAPACK band layout (an extra `kl`
//! super-diagonals absorb the pivoting fill).

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    /// column-major, entry (i, j) at data[j * ldab + kl + ku + i - j]
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, data: vec![0.0; n * ldab] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.kl + self.ku >= j && i <= j + self.kl);
        j * self.ldab + self.kl + self.ku + i - j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.offset(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j);
        self.data[o] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let o = self.offset(i, j);
        self.data[o] += v;
    }

    /// In-place LU with partial pivoting; consumes the matrix.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut pmax = self.get(j, j).abs();
            for i in j + 1..=j + km {
                let v = self.get(i, j).abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            ipiv[j] = p;
            if pmax == 0.0 {
                return Err(Error::LinearSolve(format!("singular pivot at column {j}")));
            }
            let jmax = (j + ku + kl).min(n - 1);
            if p != j {
                for jj in j..=jmax {
                    let a = self.get(j, jj);
                    let b = self.get(p, jj);
                    self.set(j, jj, b);
                    self.set(p, jj, a);
                }
            }
            let piv = self.get(j, j);
            for i in j + 1..=j + km {
                let l = self.get(i, j) / piv;
                self.set(i, j, l);
            }
            for jj in j + 1..=jmax {
                let f = self.get(j, jj);
                if f != 0.0 {
                    for i in j + 1..=j + km {
                        let l = self.get(i, j);
                        if l != 0.0 {
                            self.add(i, jj, -l * f);
                        }
                    }
                }
            }
        }
        Ok(BandLu { mat: self, ipiv })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    mat: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.mat.n;
        assert_eq!(rhs.len(), n);
        let (kl, ku) = (self.mat.kl, self.mat.ku);
        let mut b = rhs.to_vec();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(p, j);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for i in j + 1..=j + km {
                    b[i] -= self.mat.get(i, j) * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.mat.get(j, j);
            let bj = b[j];
            if bj != 0.0 {
                let imin = j.saturating_sub(ku + kl);
                for i in imin..j {
                    b[i] -= self.mat.get(i, j) * bj;
                }
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tridiagonal_solve() {
        // -u'' discretization, known solution
        let n = 8;
        let mut a = BandMatrix::new(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = 2.0 * x_true[i];
            if i > 0 {
                rhs[i] -= x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] -= x_true[i + 1];
            }
        }
        let lu = a.factor().unwrap();
        let x = lu.solve(&rhs);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_errors() {
        let a = BandMatrix::new(3, 1, 1);
        assert!(a.factor().is_err());
    }

    #[test]
    fn matches_dense_lu_on_random_bands() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let n = rng.gen_range(5..40usize);
            let kl = rng.gen_range(1..5usize).min(n - 1);
            let ku = rng.gen_range(1..5usize).min(n - 1);
            let mut band = BandMatrix::new(n, kl, ku);
            let mut dense = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i + ku >= j && i <= j + kl {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        let v = if i == j { v + 4.0 } else { v };
                        band.set(i, j, v);
                        dense[(i, j)] = v;
                    }
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x_band = band.factor().unwrap().solve(&rhs);
            let x_dense = dense
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&rhs))
                .unwrap();
            for i in 0..n {
                assert!(
                    (x_band[i] - x_dense[i]).abs() < 1e-9,
                    "trial {trial} entry {i}: {} vs {}",
                    x_band[i],
                    x_dense[i]
                );
            }
        }
    }
}
