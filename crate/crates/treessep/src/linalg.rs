//! Small dense linear algebra: tridiagonal solves and symmetric
//! eigendecomposition by cyclic Jacobi rotations.
//!
//! The systems here are tiny (covariance matrices over a handful of target
//! vertices, radial resolvent systems of a few hundred states), so hand-rolled
//! direct methods are simpler and faster than pulling in a matrix crate.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solve a tridiagonal system by the Thomas algorithm.
///
/// `sub`, `diag`, `sup` are the three bands; `sub[0]` and `sup[n-1]` are
/// ignored. The matrices solved here are strictly diagonally dominant, so no
/// pivoting is needed.
pub fn solve_tridiagonal<F: Scalar>(sub: &[F], diag: &[F], sup: &[F], rhs: &[F]) -> Result<Vec<F>> {
    let n = diag.len();
    assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let mut c = vec![F::zero(); n];
    let mut d = vec![F::zero(); n];
    let mut x = vec![F::zero(); n];
    if diag[0] == F::zero() {
        return Err(Error::Domain("singular tridiagonal system".into()));
    }
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        if denom == F::zero() {
            return Err(Error::Domain("singular tridiagonal system".into()));
        }
        if i + 1 < n {
            c[i] = sup[i] / denom;
        }
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Symmetric eigendecomposition of a small dense matrix (row-major, n x n)
/// by cyclic Jacobi rotations. Returns (eigenvalues, eigenvectors) with the
/// eigenvector for `values[k]` in `vectors[k]`.
pub fn sym_eigen<F: Scalar>(mat: &[F], n: usize) -> (Vec<F>, Vec<Vec<F>>) {
    assert_eq!(mat.len(), n * n);
    let mut a = mat.to_vec();
    // v starts as the identity and accumulates rotations (columns are eigenvectors).
    let mut v = vec![F::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = F::one();
    }
    let eps = F::epsilon() * F::of(16.0);
    for _sweep in 0..64 {
        let mut off = F::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        let scale: F = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= eps * eps * (scale + off) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == F::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (F::of(2.0) * apq);
                let t = if theta >= F::zero() {
                    F::one() / (theta + (F::one() + theta * theta).sqrt())
                } else {
                    -F::one() / (-theta + (F::one() + theta * theta).sqrt())
                };
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values: Vec<F> = (0..n).map(|i| a[i * n + i]).collect();
    let vectors: Vec<Vec<F>> = (0..n)
        .map(|k| (0..n).map(|i| v[i * n + k]).collect())
        .collect();
    (values, vectors)
}

/// Minimal-norm least-squares solve of a symmetric PSD system `A x = b`
/// through the eigendecomposition, dropping eigenvalues below `rank_tol`
/// relative to the largest. Returns `(x, residual_norm)`.
pub fn sym_solve_min_norm<F: Scalar>(mat: &[F], n: usize, b: &[F], rank_tol: F) -> (Vec<F>, F) {
    let (values, vectors) = sym_eigen(mat, n);
    let max_ev = values
        .iter()
        .fold(F::zero(), |m, &x| if x.abs() > m { x.abs() } else { m });
    let cutoff = max_ev * rank_tol;
    let mut x = vec![F::zero(); n];
    for k in 0..n {
        if values[k].abs() <= cutoff {
            continue;
        }
        let coef: F = (0..n).map(|i| vectors[k][i] * b[i]).sum();
        let scaled = coef / values[k];
        for i in 0..n {
            x[i] += scaled * vectors[k][i];
        }
    }
    // residual = |A x - b|
    let mut res = F::zero();
    for i in 0..n {
        let mut ax = F::zero();
        for j in 0..n {
            ax += mat[i * n + j] * x[j];
        }
        let r = ax - b[i];
        res += r * r;
    }
    (x, res.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solves_diagonally_dominant_system() {
        let n = 5;
        let sub = vec![0.0f64, -1.0, -1.0, -1.0, -1.0];
        let diag = vec![4.0f64; n];
        let sup = vec![-1.0f64, -1.0, -1.0, -1.0, 0.0];
        let rhs = vec![1.0f64, 2.0, 3.0, 2.0, 1.0];
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for i in 0..n {
            let mut ax = diag[i] * x[i];
            if i > 0 {
                ax += sub[i] * x[i - 1];
            }
            if i + 1 < n {
                ax += sup[i] * x[i + 1];
            }
            assert!((ax - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = vec![2.0, 1.0, 1.0, 2.0];
        let (mut vals, _) = sym_eigen(&a, 2);
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((vals[0] - 1.0f64).abs() < 1e-12);
        assert!((vals[1] - 3.0f64).abs() < 1e-12);
    }

    #[test]
    fn min_norm_solve_hits_target() {
        let a = vec![3.0, 1.0, 1.0, 2.0];
        let b = vec![5.0, 4.0];
        let (x, res) = sym_solve_min_norm(&a, 2, &b, 1e-12);
        assert!(res < 1e-12_f64);
        assert!((3.0 * x[0] + x[1] - 5.0f64).abs() < 1e-12);
        assert!((x[0] + 2.0 * x[1] - 4.0f64).abs() < 1e-12);
    }

    #[test]
    fn min_norm_solve_works_in_f32() {
        let a: Vec<f32> = vec![2.0, 0.0, 0.0, 1.0];
        let b: Vec<f32> = vec![2.0, 3.0];
        let (x, res) = sym_solve_min_norm(&a, 2, &b, 1e-6);
        assert!(res < 1e-5);
        assert!((x[0] - 1.0).abs() < 1e-6);
        assert!((x[1] - 3.0).abs() < 1e-6);
    }
}
