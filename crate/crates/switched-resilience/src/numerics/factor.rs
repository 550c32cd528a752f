//! Cholesky and LU factorizations for the solver hot path.

use super::{Matrix, NumericsError};

/// Lower-triangular Cholesky factor of a positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factor `S = L Lᵀ`. Fails when `S` is not (numerically) positive
    /// definite.
    pub fn new(s: &Matrix) -> Result<Self, NumericsError> {
        assert!(s.is_square(), "cholesky of a non-square matrix");
        let n = s.rows();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = s[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(NumericsError::NotPositiveDefinite);
                    }
                    l[(i, j)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solve `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.l[(i, k)] * b[k];
            }
            b[i] = sum / self.l[(i, i)];
        }
    }

    /// Solve `Lᵀ y = b` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut sum = b[i];
            for k in (i + 1)..n {
                sum -= self.l[(k, i)] * b[k];
            }
            b[i] = sum / self.l[(i, i)];
        }
    }

    /// Solve `S x = b`.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    /// `L⁻¹ M L⁻ᵀ` for symmetric `M`: the congruence used to whiten
    /// constraint derivative matrices.
    pub fn whiten(&self, m: &Matrix) -> Matrix {
        let n = self.dim();
        assert_eq!(m.rows(), n);
        assert_eq!(m.cols(), n);
        // columns of W1 = L⁻¹ M  (forward solve per column)
        let mut w = m.clone();
        for j in 0..n {
            for i in 0..n {
                let mut sum = w[(i, j)];
                for k in 0..i {
                    sum -= self.l[(i, k)] * w[(k, j)];
                }
                w[(i, j)] = sum / self.l[(i, i)];
            }
        }
        // W2 = W1 L⁻ᵀ  ⇔  (L⁻¹ W1ᵀ)ᵀ, again forward solves on the transpose
        let mut wt = w.transpose();
        for j in 0..n {
            for i in 0..n {
                let mut sum = wt[(i, j)];
                for k in 0..i {
                    sum -= self.l[(i, k)] * wt[(k, j)];
                }
                wt[(i, j)] = sum / self.l[(i, i)];
            }
        }
        wt.transpose()
    }

    /// `S⁻¹` via the factor.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let x = self.solve_vec(&e);
            for i in 0..n {
                inv[(i, j)] = x[i];
            }
        }
        inv
    }

    pub fn log_det(&self) -> f64 {
        (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>() * 2.0
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign_swaps: usize,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self, NumericsError> {
        assert!(a.is_square(), "lu of a non-square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let mut piv = k;
            let mut max = lu[(k, k)].abs();
            for i in (k + 1)..n {
                if lu[(i, k)].abs() > max {
                    max = lu[(i, k)].abs();
                    piv = i;
                }
            }
            if max == 0.0 || !max.is_finite() {
                return Err(NumericsError::Singular);
            }
            if piv != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = t;
                }
                perm.swap(k, piv);
                swaps += 1;
            }
            for i in (k + 1)..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        Ok(Self { lu, perm, sign_swaps: swaps })
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n);
        let mut out = Matrix::zeros(n, b.cols());
        for j in 0..b.cols() {
            let col: Vec<f64> = (0..n).map(|i| b[(i, j)]).collect();
            let x = self.solve_vec(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix {
        self.solve_matrix(&Matrix::identity(self.lu.rows()))
    }

    pub fn det(&self) -> f64 {
        let d: f64 = (0..self.lu.rows()).map(|i| self.lu[(i, i)]).product();
        if self.sign_swaps % 2 == 0 {
            d
        } else {
            -d
        }
    }
}

/// 1-norm condition estimate `‖A‖₁ ‖A⁻¹‖₁` (exact inverse, fine at these
/// orders).
pub fn condition_1(a: &Matrix) -> Result<f64, NumericsError> {
    let lu = Lu::new(a)?;
    let inv = lu.inverse();
    let norm1 = |m: &Matrix| {
        (0..m.cols())
            .map(|j| (0..m.rows()).map(|i| m[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    Ok(norm1(a) * norm1(&inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves() {
        let s = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let ch = Cholesky::new(&s).unwrap();
        let x = ch.solve_vec(&[2.0, 1.0]);
        let sx = s.matvec(&x);
        assert!((sx[0] - 2.0).abs() < 1e-12 && (sx[1] - 1.0).abs() < 1e-12);
        assert!((ch.log_det() - (4.0 * 3.0 - 4.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let s = Matrix::from_rows(&[vec![1.0, 5.0], vec![5.0, 1.0]]);
        assert!(matches!(Cholesky::new(&s), Err(NumericsError::NotPositiveDefinite)));
    }

    #[test]
    fn whiten_matches_explicit_inverse() {
        let s = Matrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]]);
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![2.0, -1.0, 1.0], vec![0.0, 1.0, 3.0]]);
        let ch = Cholesky::new(&s).unwrap();
        let w = ch.whiten(&m);
        // tr(W) should equal tr(S⁻¹ M)
        let sinv = ch.inverse();
        let tr_w: f64 = (0..3).map(|i| w[(i, i)]).sum();
        let sm = sinv.matmul(&m);
        let tr_sm: f64 = (0..3).map(|i| sm[(i, i)]).sum();
        assert!((tr_w - tr_sm).abs() < 1e-12);
    }

    #[test]
    fn lu_solve_and_det() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![1.0, 1.0]]);
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve_vec(&[4.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        assert!((lu.det() + 2.0).abs() < 1e-14);
        assert!(Lu::new(&Matrix::zeros(2, 2)).is_err());
    }
}
