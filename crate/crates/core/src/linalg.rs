//! Small dense symmetric-matrix helpers for the Mahalanobis machinery.
//! Dimensions here are feature dimensions (a handful, maybe dozens), so
//! simple O(d^3) routines are the right tool.

use crate::{flt, Error, Result, Scalar};

/// Eigenvalues of a symmetric matrix via the cyclic Jacobi method.
/// The input is symmetrized first so callers may pass matrices that are
/// symmetric only up to roundoff.
pub(crate) fn symmetric_eigenvalues<F: Scalar>(m: &[Vec<F>]) -> Vec<F> {
    let d = m.len();
    let mut a: Vec<Vec<F>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (m[i][j] + m[j][i]) / flt(2.0))
                .collect()
        })
        .collect();

    let two = flt::<F>(2.0);
    for _sweep in 0..64 {
        let mut off = F::zero();
        for i in 0..d {
            for j in (i + 1)..d {
                off = off + a[i][j] * a[i][j];
            }
        }
        let scale = (0..d).fold(F::zero(), |s, i| s + a[i][i].abs()) + F::one();
        if off.sqrt() <= F::epsilon() * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                if a[p][q] == F::zero() {
                    continue;
                }
                // Classic 2x2 rotation annihilating a[p][q].
                let theta = (a[q][q] - a[p][p]) / (two * a[p][q]);
                let t = {
                    let sign = if theta >= F::zero() { F::one() } else { -F::one() };
                    sign / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for i in 0..d {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..d {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    (0..d).map(|i| a[i][i]).collect()
}

/// Matrix inverse by Gauss-Jordan elimination with partial pivoting.
pub(crate) fn invert<F: Scalar>(m: &[Vec<F>]) -> Result<Vec<Vec<F>>> {
    let d = m.len();
    let mut a: Vec<Vec<F>> = m.to_vec();
    let mut inv: Vec<Vec<F>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { F::one() } else { F::zero() }).collect())
        .collect();

    let mut scale = F::zero();
    for row in &a {
        for &v in row {
            scale = scale.max(v.abs());
        }
    }
    let tiny = (scale + F::one()) * flt(1e-14);

    for col in 0..d {
        let pivot_row = (col..d)
            .max_by(|&r1, &r2| {
                a[r1][col]
                    .abs()
                    .partial_cmp(&a[r2][col].abs())
                    .expect("pivot magnitudes are finite")
            })
            .expect("non-empty pivot range");
        if a[pivot_row][col].abs() <= tiny {
            return Err(Error::SingularMatrix);
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);

        let pivot = a[col][col];
        for j in 0..d {
            a[col][j] = a[col][j] / pivot;
            inv[col][j] = inv[col][j] / pivot;
        }
        for row in 0..d {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor == F::zero() {
                continue;
            }
            for j in 0..d {
                a[row][j] = a[row][j] - factor * a[col][j];
                inv[row][j] = inv[row][j] - factor * inv[col][j];
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = vec![vec![3.0, 0.0], vec![0.0, -1.0]];
        let mut eig = symmetric_eigenvalues(&m);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_abs_diff_eq!(eig[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_of_rotation_invariant_form() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let mut eig = symmetric_eigenvalues(&m);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_abs_diff_eq!(eig[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eig[1], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, -1.0], vec![0.0, -1.0, 2.0]];
        let inv = invert(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|l| m[i][l] * inv[l][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(invert(&m), Err(Error::SingularMatrix)));
    }
}
