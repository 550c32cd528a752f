//! Dense small-matrix kernel.
//!
//! Everything in this toolkit works on matrices of order ≲ 30, so the kernel
//! favours accuracy and simplicity over asymptotics: cyclic Jacobi for
//! symmetric eigenvalues, full decompositions for null spaces, and
//! scaling-and-squaring for the matrix exponential.

mod eigen;
mod expm;
mod factor;
mod nullspace;

pub use eigen::{extreme_eigenvalues, sym_eigen};
pub use expm::{expm, zoh_discretize};
pub use factor::{Cholesky, Lu};
pub use nullspace::orthonormal_null_basis;

use std::fmt;

use thiserror::Error;

/// Errors produced by the dense kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),
    #[error("matrix is not symmetric: max asymmetry {0:.3e}")]
    NotSymmetric(f64),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { rows: rows.len(), cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn column(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add dimension");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub dimension");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let data = self.data.iter().map(|a| a * s).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add dimension");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, other: &Matrix, s: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add dimension");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// Largest absolute entry.
    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum (induced infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Copy `block` into position with its top-left corner at `(row, col)`.
    pub fn set_block(&mut self, row: usize, col: usize, block: &Matrix) {
        assert!(row + block.rows <= self.rows && col + block.cols <= self.cols, "block bounds");
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(row + i, col + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, row: usize, col: usize, rows: usize, cols: usize) -> Matrix {
        assert!(row + rows <= self.rows && col + cols <= self.cols, "block bounds");
        Matrix::from_fn(rows, cols, |i, j| self[(row + i, col + j)])
    }

    /// Spectral radius estimate via normalized repeated squaring of the
    /// matrix power `M^(2^12)`. Accurate to a fraction of a percent for
    /// diagonalizable matrices of moderate conditioning, which is all the
    /// Schur-stability screening here needs.
    pub fn spectral_radius_estimate(&self) -> f64 {
        assert!(self.is_square(), "spectral radius of a non-square matrix");
        if self.rows == 0 {
            return 0.0;
        }
        let mut n = self.clone();
        let mut log_scale = 0.0_f64;
        let squarings = 12u32;
        for _ in 0..squarings {
            let f = n.norm_fro();
            if f == 0.0 {
                return 0.0;
            }
            n = n.scale(1.0 / f);
            log_scale = 2.0 * (log_scale + f.ln());
            n = n.matmul(&n);
        }
        let f = n.norm_fro().max(f64::MIN_POSITIVE);
        ((log_scale + f.ln()) / 2f64.powi(squarings as i32)).exp()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:>12.6}", self[(i, j)])?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Symmetric matrix, stored symmetrized as `(S + Sᵀ)/2`.
///
/// Construction rejects matrices whose asymmetry exceeds
/// `1e-12 · (1 + ‖S‖_max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(Matrix);

impl SymmetricMatrix {
    pub fn new(m: Matrix) -> Result<Self, NumericsError> {
        if !m.is_square() {
            return Err(NumericsError::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        if !m.is_finite() {
            return Err(NumericsError::NonFinite);
        }
        let mut asym = 0.0_f64;
        for i in 0..m.rows {
            for j in (i + 1)..m.cols {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if asym > 1e-12 * (1.0 + m.norm_max()) {
            return Err(NumericsError::NotSymmetric(asym));
        }
        let mut s = m;
        for i in 0..s.rows {
            for j in (i + 1)..s.cols {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(Self(s))
    }

    /// Symmetrize unconditionally; for callers that construct the matrix
    /// from an algebraically symmetric recipe and only need to shed
    /// round-off asymmetry.
    pub fn symmetrize(m: Matrix) -> Result<Self, NumericsError> {
        if !m.is_square() {
            return Err(NumericsError::DimensionMismatch("symmetrize needs square".into()));
        }
        if !m.is_finite() {
            return Err(NumericsError::NonFinite);
        }
        let mut s = m;
        for i in 0..s.rows {
            for j in (i + 1)..s.cols {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(Self(s))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Quadratic form `vᵀ S v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let sv = self.0.matvec(v);
        v.iter().zip(&sv).map(|(a, b)| a * b).sum()
    }
}

/// One cell of a block grid: a concrete matrix or an inferred zero block.
pub type Block<'a> = Option<&'a Matrix>;

/// Concatenate a 2-D arrangement of blocks into one matrix.
///
/// Zero cells (`None`) take the row count of their grid row and the column
/// count of their grid column, both inferred from the concrete blocks.
pub fn assemble_block(grid: &[Vec<Block<'_>>]) -> Result<Matrix, NumericsError> {
    if grid.is_empty() || grid[0].is_empty() {
        return Err(NumericsError::DimensionMismatch("empty block grid".into()));
    }
    let ncols = grid[0].len();
    if grid.iter().any(|r| r.len() != ncols) {
        return Err(NumericsError::DimensionMismatch("ragged block grid".into()));
    }
    let mut row_dims: Vec<Option<usize>> = vec![None; grid.len()];
    let mut col_dims: Vec<Option<usize>> = vec![None; ncols];
    for (i, row) in grid.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some(m) = cell {
                match row_dims[i] {
                    None => row_dims[i] = Some(m.rows()),
                    Some(r) if r != m.rows() => {
                        return Err(NumericsError::DimensionMismatch(format!(
                            "block ({i},{j}) has {} rows, expected {r}",
                            m.rows()
                        )))
                    }
                    _ => {}
                }
                match col_dims[j] {
                    None => col_dims[j] = Some(m.cols()),
                    Some(c) if c != m.cols() => {
                        return Err(NumericsError::DimensionMismatch(format!(
                            "block ({i},{j}) has {} cols, expected {c}",
                            m.cols()
                        )))
                    }
                    _ => {}
                }
            }
        }
    }
    let row_dims: Vec<usize> = row_dims
        .into_iter()
        .enumerate()
        .map(|(i, d)| d.ok_or(NumericsError::DimensionMismatch(format!("grid row {i} is all zero cells"))))
        .collect::<Result<_, _>>()?;
    let col_dims: Vec<usize> = col_dims
        .into_iter()
        .enumerate()
        .map(|(j, d)| d.ok_or(NumericsError::DimensionMismatch(format!("grid column {j} is all zero cells"))))
        .collect::<Result<_, _>>()?;

    let total_rows = row_dims.iter().sum();
    let total_cols = col_dims.iter().sum();
    let mut out = Matrix::zeros(total_rows, total_cols);
    let mut r0 = 0;
    for (i, row) in grid.iter().enumerate() {
        let mut c0 = 0;
        for (j, cell) in row.iter().enumerate() {
            if let Some(m) = cell {
                out.set_block(r0, c0, m);
            }
            c0 += col_dims[j];
        }
        r0 += row_dims[i];
    }
    Ok(out)
}

/// Stack the entries of `vs` into one vector.
pub fn concat_vec(vs: &[&[f64]]) -> Vec<f64> {
    vs.iter().flat_map(|v| v.iter().copied()).collect()
}

pub fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn vec_norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn block_identity_diagonal() {
        let i2 = Matrix::identity(2);
        let out = assemble_block(&[vec![Some(&i2), None], vec![None, Some(&i2)]]).unwrap();
        assert_eq!(out, Matrix::identity(4));
    }

    #[test]
    fn block_direct_concatenation() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = mat(&[&[5.0], &[6.0]]);
        let i1 = Matrix::identity(1);
        let out = assemble_block(&[vec![Some(&a), Some(&b)], vec![None, Some(&i1)]]).unwrap();
        let expect = mat(&[&[1.0, 2.0, 5.0], &[3.0, 4.0, 6.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(out, expect);
    }

    #[test]
    fn block_rejects_conflicts() {
        let a = mat(&[&[1.0, 2.0]]);
        let b = mat(&[&[1.0], &[2.0]]);
        // a is 1x2, b is 2x1; sharing a grid row forces inconsistent heights
        let err = assemble_block(&[vec![Some(&a), Some(&b)]]).unwrap_err();
        assert!(matches!(err, NumericsError::DimensionMismatch(_)));
        // all-zero column cannot be inferred
        let err = assemble_block(&[vec![Some(&a), None]]).unwrap_err();
        assert!(matches!(err, NumericsError::DimensionMismatch(_)));
    }

    /// Independent scalar-loop concatenation oracle.
    fn assemble_oracle(grid: &[Vec<Block<'_>>], row_dims: &[usize], col_dims: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(row_dims.iter().sum(), col_dims.iter().sum());
        for (bi, row) in grid.iter().enumerate() {
            for (bj, cell) in row.iter().enumerate() {
                let r0: usize = row_dims[..bi].iter().sum();
                let c0: usize = col_dims[..bj].iter().sum();
                for i in 0..row_dims[bi] {
                    for j in 0..col_dims[bj] {
                        out[(r0 + i, c0 + j)] = match cell {
                            Some(m) => m[(i, j)],
                            None => 0.0,
                        };
                    }
                }
            }
        }
        out
    }

    #[test]
    fn block_matches_scalar_loop_oracle() {
        // the closed-loop grid [[A+BK, 0],[I, 0]] for the first two-mode
        // example plant, expanded entry by entry
        let a = mat(&[&[0.88, 0.23], &[0.84, -0.47]]);
        let b = mat(&[&[-0.77, -0.33], &[-0.31, 0.50]]);
        let k = mat(&[&[0.7848, 0.0864], &[0.2825, 0.3376]]);
        let abk = a.add(&b.matmul(&k));
        let i2 = Matrix::identity(2);
        let grid = vec![vec![Some(&abk), None], vec![Some(&i2), None]];
        let got = assemble_block(&grid).unwrap();
        let want = assemble_oracle(&grid, &[2, 2], &[2, 2]);
        assert_eq!(got, want);
    }

    #[test]
    fn block_assembly_is_associative() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = mat(&[&[5.0], &[6.0]]);
        let c = mat(&[&[7.0, 8.0]]);
        let d = mat(&[&[9.0]]);
        // flat 2x2 grid
        let flat = assemble_block(&[vec![Some(&a), Some(&b)], vec![Some(&c), Some(&d)]]).unwrap();
        // nested: assemble rows first, then stack
        let top = assemble_block(&[vec![Some(&a), Some(&b)]]).unwrap();
        let bottom = assemble_block(&[vec![Some(&c), Some(&d)]]).unwrap();
        let nested = assemble_block(&[vec![Some(&top)], vec![Some(&bottom)]]).unwrap();
        assert_eq!(flat, nested);
    }

    #[test]
    fn symmetric_construction_checks() {
        let s = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!(SymmetricMatrix::new(s).is_ok());
        let ns = mat(&[&[2.0, 1.0], &[0.0, 2.0]]);
        assert!(matches!(SymmetricMatrix::new(ns), Err(NumericsError::NotSymmetric(_))));
    }

    #[test]
    fn spectral_radius_estimate_on_known_cases() {
        let m = Matrix::diag(&[0.5, -0.9]);
        assert!((m.spectral_radius_estimate() - 0.9).abs() < 1e-3);
        let r = mat(&[&[0.0, 1.0], &[-1.0, 0.0]]); // rotation, radius 1
        assert!((r.spectral_radius_estimate() - 1.0).abs() < 1e-3);
        let u = mat(&[&[1.1, 0.3], &[0.0, 0.2]]);
        assert!((u.spectral_radius_estimate() - 1.1).abs() < 2e-3);
    }
}
