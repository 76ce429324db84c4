//! Least squares by Householder QR with column pivoting.

use alloc::vec;
use alloc::vec::Vec;

/// Relative size of `|R_jj| / |R_00|` below which column `j` is treated as
/// linearly dependent on the columns before it.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// Coefficients in the original column order; zero for dependent columns.
    pub coeffs: Vec<f64>,
    /// `true` for columns dropped as linearly dependent.
    pub dependent: Vec<bool>,
    /// Diagonal of `(RᵀR)⁻¹` in the original column order, `None` for
    /// dependent columns. Multiply by the residual variance for `Var(β̂)`.
    pub unscaled_variance: Vec<Option<f64>>,
    pub rank: usize,
}

/// Minimises `|y − Xβ|₂` where `X` is given column by column.
///
/// All columns must have the length of `y`.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> LeastSquares {
    let n = y.len();
    let p = columns.len();
    debug_assert!(columns.iter().all(|c| c.len() == n));
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut b = y.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut diag = vec![0.0; p];
    let steps = n.min(p);

    for j in 0..steps {
        let norm_sq = |col: &Vec<f64>| col[j..].iter().map(|v| v * v).sum::<f64>();
        let mut best = j;
        let mut best_norm = norm_sq(&a[j]);
        for c in j + 1..p {
            let v = norm_sq(&a[c]);
            if v > best_norm {
                best = c;
                best_norm = v;
            }
        }
        a.swap(j, best);
        perm.swap(j, best);

        let norm = libm::sqrt(best_norm);
        if norm == 0.0 {
            diag[j] = 0.0;
            continue;
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        diag[j] = alpha;
        a[j][j] = alpha;
        for x in a[j][j + 1..].iter_mut() {
            *x = 0.0;
        }
        if vv == 0.0 {
            continue;
        }
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(col.iter()).map(|(x, y)| x * y).sum();
            let f = 2.0 * dot / vv;
            for (c, x) in col.iter_mut().zip(&v) {
                *c -= f * x;
            }
        };
        for col in a.iter_mut().skip(j + 1) {
            reflect(&mut col[j..]);
        }
        reflect(&mut b[j..]);
    }

    let lead = diag.first().map_or(0.0, |d| libm::fabs(*d));
    let rank = if lead == 0.0 {
        0
    } else {
        diag[..steps]
            .iter()
            .take_while(|d| libm::fabs(**d) > RANK_TOLERANCE * lead)
            .count()
    };

    // Back substitution on the leading rank×rank block; R[i][j] = a[j][i].
    let mut z = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut s = b[i];
        for j in i + 1..rank {
            s -= a[j][i] * z[j];
        }
        z[i] = s / a[i][i];
    }

    // Inverse of the upper-triangular block, column by column.
    let mut rinv = vec![vec![0.0; rank]; rank];
    for c in 0..rank {
        for i in (0..=c).rev() {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for j in i + 1..=c {
                s -= a[j][i] * rinv[j][c];
            }
            rinv[i][c] = s / a[i][i];
        }
    }

    let mut coeffs = vec![0.0; p];
    let mut dependent = vec![true; p];
    let mut unscaled_variance = vec![None; p];
    for i in 0..rank {
        let col = perm[i];
        coeffs[col] = z[i];
        dependent[col] = false;
        unscaled_variance[col] = Some(rinv[i].iter().map(|x| x * x).sum());
    }
    LeastSquares {
        coeffs,
        dependent,
        unscaled_variance,
        rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x1: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let ones = vec![1.0; 10];
        let y: Vec<f64> = x1.iter().map(|x| 2.0 + 3.0 * x).collect();
        let ls = least_squares(&[ones, x1], &y);
        assert_eq!(ls.rank, 2);
        assert!((ls.coeffs[0] - 2.0).abs() < 1e-12);
        assert!((ls.coeffs[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_column_is_flagged() {
        let x1: Vec<f64> = (0..8).map(|k| (k as f64).sin()).collect();
        let ones = vec![1.0; 8];
        let y: Vec<f64> = x1.iter().map(|x| 1.0 + x).collect();
        let ls = least_squares(&[ones, x1.clone(), x1], &y);
        assert_eq!(ls.rank, 2);
        assert_eq!(ls.dependent.iter().filter(|d| **d).count(), 1);
        let fitted: Vec<f64> = (0..8)
            .map(|k| ls.coeffs[0] + (ls.coeffs[1] + ls.coeffs[2]) * (k as f64).sin())
            .collect();
        for (f, t) in fitted.iter().zip(&y) {
            assert!((f - t).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let ls = least_squares(&[vec![0.0; 4]], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ls.rank, 0);
        assert_eq!(ls.coeffs, vec![0.0]);
    }

    #[test]
    fn unscaled_variance_of_intercept_only() {
        let ls = least_squares(&[vec![1.0; 5]], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((ls.coeffs[0] - 3.0).abs() < 1e-14);
        assert!((ls.unscaled_variance[0].unwrap() - 0.2).abs() < 1e-14);
    }
}
