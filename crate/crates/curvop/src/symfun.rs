//! Elementary symmetric functions, deleted-index variants, Gårding cone
//! predicates and the Newton-MacLaurin quantities.
//!
//! All sigma evaluations go through the stable product recurrence (the
//! coefficients of `prod_i (1 + lambda_i t)`), never subset enumeration.

use crate::{Error, Result};

/// Ordered eigenvalue vector of a symmetric matrix, sorted non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts the entries descending (stable, so equal eigenvalues keep their
    /// input order) and rejects non-finite values.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        values.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Binomial coefficient as f64; exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// All sigma_0..sigma_n of `lambda` by the product recurrence, O(n^2).
pub fn sigma_table(lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (idx, &x) in lambda.iter().enumerate() {
        for j in (1..=idx + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// sigma_m(lambda); sigma_0 = 1 for any lambda.
pub fn elementary_symmetric(lambda: &Spectrum, m: usize) -> Result<f64> {
    let n = lambda.dim();
    if m > n {
        return Err(Error::OrderOutOfRange { m, n });
    }
    Ok(sigma_raw(lambda.values(), m))
}

/// sigma_m of an unsorted slice; internal entry point for the solvers, which
/// need to keep slot correspondence (e.g. radial vs tangential eigenvalues).
pub fn sigma_raw(lambda: &[f64], m: usize) -> f64 {
    debug_assert!(m <= lambda.len());
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for &x in lambda {
        for j in (1..=m).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e[m]
}

/// Table sigma_0..sigma_m of `lambda` with entry `i` removed (0-based).
pub fn deleted_sigma_table(lambda: &[f64], m: usize, i: usize) -> Vec<f64> {
    debug_assert!(i < lambda.len());
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for (idx, &x) in lambda.iter().enumerate() {
        if idx == i {
            continue;
        }
        for j in (1..=m).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// sigma_m(lambda | i), the m-th symmetric function with entry `i` (0-based)
/// removed. Satisfies sigma_m(lambda) = sigma_m(lambda|i) + lambda_i
/// sigma_{m-1}(lambda|i).
pub fn deleted_symmetric(lambda: &Spectrum, m: usize, i: usize) -> Result<f64> {
    let n = lambda.dim();
    if i >= n {
        return Err(Error::IndexOutOfRange { i, n });
    }
    if m > n - 1 {
        return Err(Error::OrderOutOfRange { m, n });
    }
    Ok(deleted_sigma_table(lambda.values(), m, i)[m])
}

/// True iff sigma_m(lambda) > margin for all 1 <= m <= j. `j = 0` is the
/// whole space and returns true.
pub fn cone_contains(lambda: &Spectrum, j: usize, margin: f64) -> bool {
    cone_margin_raw(lambda.values(), j) > margin
}

/// min over 1 <= m <= j of sigma_m(lambda); +inf for j = 0.
pub fn cone_margin_raw(lambda: &[f64], j: usize) -> f64 {
    let table = sigma_table(lambda);
    table[1..=j.min(lambda.len())]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// sigma_k sigma_{k-2} / sigma_{k-1}^2, to be compared against
/// [`newton_maclaurin_bound`].
pub fn newton_maclaurin_ratio(lambda: &Spectrum, k: usize) -> Result<f64> {
    let n = lambda.dim();
    if k < 2 || k > n {
        return Err(Error::OrderOutOfRange { m: k, n });
    }
    let table = sigma_table(lambda.values());
    let denom = table[k - 1];
    if denom == 0.0 {
        return Err(Error::SingularDenominator);
    }
    Ok(table[k] * table[k - 2] / (denom * denom))
}

/// (k-1)(n-k+1) / (k(n-k+2)), the sharp constant in
/// sigma_k sigma_{k-2} <= c sigma_{k-1}^2, with equality at lambda ∝ 1.
pub fn newton_maclaurin_bound(n: usize, k: usize) -> f64 {
    ((k - 1) * (n - k + 1)) as f64 / ((k * (n - k + 2)) as f64)
}

/// sigma_m(lambda + s*1) from the sigma table of lambda alone:
/// sum_{i=0}^{m} binom(n-i, m-i) s^{m-i} sigma_i(lambda).
pub fn shift_expansion(sigma: &[f64], s: f64, m: usize, n: usize) -> f64 {
    debug_assert!(m < sigma.len());
    let mut acc = 0.0;
    for i in 0..=m {
        acc += binomial(n - i, m - i) * s.powi((m - i) as i32) * sigma[i];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sigma_zero_is_one() {
        assert_eq!(elementary_symmetric(&spec(&[3.0, -7.0, 0.1]), 0).unwrap(), 1.0);
    }

    #[test]
    fn example_fixture_values() {
        // the canonical (-1/4, 1) spectrum
        let l = spec(&[-0.25, 1.0]);
        assert_eq!(elementary_symmetric(&l, 1).unwrap(), 0.75);
        assert_eq!(elementary_symmetric(&l, 2).unwrap(), -0.25);
    }

    #[test]
    fn sigma2_of_123() {
        let l = spec(&[1.0, 2.0, 3.0]);
        // pairs: 1*2 + 1*3 + 2*3
        assert_eq!(elementary_symmetric(&l, 2).unwrap(), 11.0);
    }

    #[test]
    fn order_out_of_range() {
        assert!(elementary_symmetric(&spec(&[1.0, 2.0]), 3).is_err());
    }

    #[test]
    fn deleted_single_remaining() {
        let l = spec(&[2.0, 3.0]);
        // sorted is (3, 2); removing the entry 2 leaves 3
        assert_eq!(deleted_symmetric(&l, 1, 1).unwrap(), 3.0);
        assert_eq!(deleted_symmetric(&l, 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn deleted_decomposition_123() {
        let l = spec(&[1.0, 2.0, 3.0]); // sorted (3, 2, 1); entry "2" is index 1
        let s2_del = deleted_symmetric(&l, 2, 1).unwrap();
        let s1_del = deleted_symmetric(&l, 1, 1).unwrap();
        assert_eq!(s2_del, 3.0);
        assert_eq!(s1_del, 4.0);
        assert_eq!(3.0 + 2.0 * s1_del, 11.0);
    }

    #[test]
    fn deleted_index_out_of_range() {
        assert!(deleted_symmetric(&spec(&[1.0, 2.0]), 1, 2).is_err());
    }

    #[test]
    fn cone_membership() {
        let ones = spec(&[1.0; 4]);
        assert!(cone_contains(&ones, 4, 0.0));
        let ex = spec(&[-0.25, 1.0]);
        assert!(cone_contains(&ex, 1, 0.0));
        assert!(!cone_contains(&ex, 2, 0.0));
        let zeros = spec(&[0.0, 0.0]);
        assert!(!cone_contains(&zeros, 1, 0.0));
    }

    #[test]
    fn nm_ratio_examples() {
        // equality at c * ones
        for &(n, k) in &[(2usize, 2usize), (3, 2), (4, 3), (5, 3)] {
            let l = spec(&vec![1.7; n]);
            let r = newton_maclaurin_ratio(&l, k).unwrap();
            assert_relative_eq!(r, newton_maclaurin_bound(n, k), epsilon = 1e-14);
        }
        let r = newton_maclaurin_ratio(&spec(&[-0.25, 1.0]), 2).unwrap();
        assert_relative_eq!(r, -4.0 / 9.0, epsilon = 1e-14);
        assert!(r <= newton_maclaurin_bound(2, 2));
        let r = newton_maclaurin_ratio(&spec(&[1.0, 2.0, 3.0]), 2).unwrap();
        assert_relative_eq!(r, 11.0 / 36.0, epsilon = 1e-14);
        assert!(r <= newton_maclaurin_bound(3, 2));
    }

    #[test]
    fn nm_singular_denominator() {
        assert!(matches!(
            newton_maclaurin_ratio(&spec(&[1.0, -1.0]), 2),
            Err(Error::SingularDenominator)
        ));
    }

    #[test]
    fn shift_expansion_examples() {
        let l = [-0.25, 1.0];
        let table = sigma_table(&l);
        assert_eq!(shift_expansion(&table, 0.0, 2, 2), table[2]);
        // sigma_2(lambda + 1) = sigma_2 + sigma_1 + 1 = 3/2
        assert_relative_eq!(shift_expansion(&table, 1.0, 2, 2), 1.5, epsilon = 1e-15);
        assert_relative_eq!(sigma_raw(&[0.75, 2.0], 2), 1.5, epsilon = 1e-15);
        // sigma_3(c * ones) = c^3 in R^3
        let z = sigma_table(&[0.0, 0.0, 0.0]);
        assert_relative_eq!(shift_expansion(&z, 1.3, 3, 3), 1.3f64.powi(3), epsilon = 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn decomposition_identity(v in prop::collection::vec(-3.0f64..3.0, 2..7), m in 1usize..6, i in 0usize..6) {
            let n = v.len();
            let m = m.min(n);
            let i = i.min(n - 1);
            let table = sigma_table(&v);
            let del = deleted_sigma_table(&v, m, i);
            let recomposed = del[m] + v[i] * del[m - 1];
            let scale = 1.0 + table[m].abs() + del[m].abs() + (v[i] * del[m - 1]).abs();
            prop_assert!((table[m] - recomposed).abs() <= 1e-12 * scale);
        }

        #[test]
        fn permutation_invariance(v in prop::collection::vec(-3.0f64..3.0, 2..7), shift in 0usize..6) {
            let n = v.len();
            let mut w = v.clone();
            w.rotate_left(shift % n);
            let a = Spectrum::new(v).unwrap();
            let b = Spectrum::new(w).unwrap();
            for m in 0..=n {
                let x = elementary_symmetric(&a, m).unwrap();
                let y = elementary_symmetric(&b, m).unwrap();
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }

        #[test]
        fn cone_nesting(v in prop::collection::vec(-3.0f64..3.0, 2..7)) {
            let n = v.len();
            let l = Spectrum::new(v).unwrap();
            for j in (1..=n).rev() {
                if cone_contains(&l, j, 0.0) {
                    for jp in 0..=j {
                        prop_assert!(cone_contains(&l, jp, 0.0));
                    }
                }
            }
        }

        #[test]
        fn shift_matches_explicit_shift(v in prop::collection::vec(-3.0f64..3.0, 2..7), s in -2.0f64..2.0) {
            let n = v.len();
            let table = sigma_table(&v);
            let shifted: Vec<f64> = v.iter().map(|x| x + s).collect();
            for m in 0..=n {
                let a = shift_expansion(&table, s, m, n);
                let b = sigma_raw(&shifted, m);
                let scale = 1.0 + a.abs() + b.abs();
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn newton_maclaurin_in_cone(v in prop::collection::vec(0.01f64..3.0, 2..7)) {
            // positive entries are in every Gamma_k
            let n = v.len();
            let l = Spectrum::new(v).unwrap();
            for k in 2..=n {
                let table = sigma_table(l.values());
                let lhs = table[k] * table[k - 2];
                let rhs = newton_maclaurin_bound(n, k) * table[k - 1] * table[k - 1];
                let scale = 1.0 + lhs.abs() + rhs.abs();
                prop_assert!(lhs <= rhs + 1e-12 * scale);
            }
        }
    }
}
