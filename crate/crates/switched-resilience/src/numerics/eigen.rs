//! Cyclic Jacobi eigenvalue decomposition for symmetric matrices.
//!
//! Plane rotations annihilate off-diagonal entries sweep by sweep; the
//! accumulated rotations are the eigenvectors. Foolproof for real symmetric
//! matrices and effectively machine-precision at the orders used here.

use super::{Matrix, NumericsError, SymmetricMatrix};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues (ascending) and matching orthonormal eigenvectors (columns).
pub fn sym_eigen(s: &SymmetricMatrix) -> Result<(Vec<f64>, Matrix), NumericsError> {
    if !s.as_matrix().is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let n = s.dim();
    let mut a = s.as_matrix().clone();
    let mut v = Matrix::identity(n);
    if n <= 1 {
        let vals = (0..n).map(|i| a[(i, i)]).collect();
        return Ok((vals, v));
    }

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= f64::EPSILON * a.norm_fro().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                // rotation threshold loosens over the first sweeps (NR style)
                let small = 100.0 * apq.abs();
                if sweep > 4
                    && a[(p, p)].abs() + small == a[(p, p)].abs()
                    && a[(q, q)].abs() + small == a[(q, q)].abs()
                {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    1.0 / (2.0 * theta)
                } else {
                    let s = if theta >= 0.0 { 1.0 } else { -1.0 };
                    s / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s_ = t * c;
                let tau = s_ / (1.0 + c);
                let h = t * apq;
                a[(p, p)] -= h;
                a[(q, q)] += h;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp - s_ * (akq + tau * akp);
                        a[(k, q)] = akq + s_ * (akp - tau * akq);
                        a[(p, k)] = a[(k, p)];
                        a[(q, k)] = a[(k, q)];
                    }
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp - s_ * (vkq + tau * vkp);
                    v[(k, q)] = vkq + s_ * (vkp - tau * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let vecs = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((vals, vecs))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn extreme_eigenvalues(s: &SymmetricMatrix) -> Result<(f64, f64), NumericsError> {
    let (vals, _) = sym_eigen(s)?;
    if vals.is_empty() {
        return Err(NumericsError::DimensionMismatch("empty matrix".into()));
    }
    Ok((vals[0], vals[vals.len() - 1]))
}
