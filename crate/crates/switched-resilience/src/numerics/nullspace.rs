//! Orthonormal null-space bases via the symmetric eigendecomposition of MᵀM.

use super::eigen::sym_eigen;
use super::{Matrix, SymmetricMatrix};

/// Orthonormal basis of `null(M)` as the columns of the returned matrix.
///
/// Rank is decided with tolerance `1e-10 · σ_max`; a zero-column result is
/// valid (trivial null space). `M = 0` returns the full identity basis.
pub fn orthonormal_null_basis(m: &Matrix) -> Matrix {
    let c = m.cols();
    let gram = SymmetricMatrix::symmetrize(m.transpose().matmul(m)).expect("finite Gram matrix");
    let (vals, vecs) = sym_eigen(&gram).expect("finite Gram matrix");
    let sigma_max = vals.last().map(|v| v.max(0.0).sqrt()).unwrap_or(0.0);
    let tol = 1e-10 * sigma_max;
    let null_cols: Vec<usize> = (0..c).filter(|&j| vals[j].max(0.0).sqrt() <= tol).collect();
    let mut basis = Matrix::zeros(c, null_cols.len());
    for (out_j, &j) in null_cols.iter().enumerate() {
        for i in 0..c {
            basis[(i, out_j)] = vecs[(i, j)];
        }
    }
    basis
}
