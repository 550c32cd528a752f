//! Affine linear-matrix-inequality systems with structured matrix variables.
//!
//! A [`FeasibilityProblem`] collects symmetric block expressions that must be
//! negative or positive semidefinite with a uniform strictness margin δ:
//! NSD constraints are enforced as `expr ⪯ -δI`, PSD as `expr ⪰ +δI`.
//! [`solve_feasibility`] finds an [`Assignment`]; [`verify`] recomputes every
//! constraint margin from scratch through the eigenvalue kernel, so a
//! certificate never has to be taken on the solver's word.

mod solver;

pub use solver::{solve_feasibility, SolveFailure, SolveOptions};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::numerics::{extreme_eigenvalues, Matrix, NumericsError, SymmetricMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LmiError {
    #[error("variable `{0}` is missing from the assignment")]
    MissingVariable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("value for `{0}` violates its declared structure: {1}")]
    BadValue(String, String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How a matrix variable is structured.
#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    Scalar,
    Symmetric(usize),
    /// Rectangular with an optional structural-zero pattern (row-major,
    /// `true` = entry fixed at exactly 0).
    Rectangular { rows: usize, cols: usize, zero_mask: Option<Vec<bool>> },
}

impl VarKind {
    /// Number of free coordinates the solver optimizes over.
    pub fn free_coords(&self) -> usize {
        match self {
            VarKind::Scalar => 1,
            VarKind::Symmetric(n) => n * (n + 1) / 2,
            VarKind::Rectangular { rows, cols, zero_mask } => match zero_mask {
                Some(mask) => mask.iter().filter(|z| !**z).count(),
                None => rows * cols,
            },
        }
    }
}

/// Handle to a declared variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableRef {
    pub id: usize,
    pub name: String,
    pub kind: VarKind,
}

/// Registry assigning unique ids to variables.
#[derive(Debug, Clone, Default)]
pub struct Variables {
    decls: Vec<VariableRef>,
}

impl Variables {
    pub fn new() -> Self {
        Self::default()
    }

    fn declare(&mut self, name: &str, kind: VarKind) -> VariableRef {
        let v = VariableRef { id: self.decls.len(), name: name.to_string(), kind };
        self.decls.push(v.clone());
        v
    }

    pub fn scalar(&mut self, name: &str) -> VariableRef {
        self.declare(name, VarKind::Scalar)
    }

    pub fn symmetric(&mut self, name: &str, n: usize) -> VariableRef {
        self.declare(name, VarKind::Symmetric(n))
    }

    pub fn rectangular(&mut self, name: &str, rows: usize, cols: usize) -> VariableRef {
        self.declare(name, VarKind::Rectangular { rows, cols, zero_mask: None })
    }

    pub fn rectangular_masked(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        zero_mask: Vec<bool>,
    ) -> VariableRef {
        assert_eq!(zero_mask.len(), rows * cols, "zero mask size");
        self.declare(name, VarKind::Rectangular { rows, cols, zero_mask: Some(zero_mask) })
    }

    pub fn decls(&self) -> &[VariableRef] {
        &self.decls
    }
}

/// One affine term `scale · L · X^(ᵀ) · R` inside a cell.
#[derive(Debug, Clone)]
pub struct Term {
    pub left: Matrix,
    pub var: usize,
    pub transposed: bool,
    pub right: Matrix,
    pub scale: f64,
}

/// A cell of the block grid: constant plus affine terms.
#[derive(Debug, Clone, Default)]
pub struct Cell {
    pub constant: Option<Matrix>,
    pub terms: Vec<Term>,
}

impl Cell {
    fn is_empty(&self) -> bool {
        self.constant.is_none() && self.terms.is_empty()
    }
}

/// Symmetric block expression. Only the upper triangle (including the
/// diagonal) is stored; cell `(j,i)` is the transpose of cell `(i,j)` by
/// construction.
#[derive(Debug, Clone)]
pub struct AffineBlockExpr {
    dims: Vec<usize>,
    cells: Vec<Cell>, // upper triangle, row-major over blocks
}

impl AffineBlockExpr {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().sum()
    }

    fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j);
        let nb = self.dims.len();
        i * nb - i * (i + 1) / 2 + j
    }

    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[self.cell_index(i, j)]
    }

    /// Ids of the variables this expression touches.
    pub fn variables(&self) -> Vec<usize> {
        let mut ids: Vec<usize> =
            self.cells.iter().flat_map(|c| c.terms.iter().map(|t| t.var)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Builder filling the upper triangle of a symmetric block grid.
pub struct ExprBuilder {
    dims: Vec<usize>,
    cells: Vec<Cell>,
}

impl ExprBuilder {
    pub fn new(dims: &[usize]) -> Self {
        let nb = dims.len();
        assert!(nb > 0, "expression needs at least one block");
        Self { dims: dims.to_vec(), cells: vec![Cell::default(); nb * (nb + 1) / 2] }
    }

    fn cell_mut(&mut self, i: usize, j: usize) -> &mut Cell {
        assert!(i <= j, "fill the upper triangle only: ({i},{j})");
        assert!(j < self.dims.len(), "block index out of range");
        let nb = self.dims.len();
        let idx = i * nb - i * (i + 1) / 2 + j;
        &mut self.cells[idx]
    }

    pub fn constant(&mut self, i: usize, j: usize, m: &Matrix, scale: f64) -> &mut Self {
        let (ri, cj) = (self.dims[i], self.dims[j]);
        assert_eq!((m.rows(), m.cols()), (ri, cj), "constant shape in cell ({i},{j})");
        let cell = self.cell_mut(i, j);
        match &mut cell.constant {
            Some(c) => c.add_scaled(m, scale),
            None => cell.constant = Some(m.scale(scale)),
        }
        self
    }

    /// Add `scale · left · X · right` to cell `(i,j)`.
    pub fn term(
        &mut self,
        i: usize,
        j: usize,
        left: &Matrix,
        var: &VariableRef,
        right: &Matrix,
        scale: f64,
    ) -> &mut Self {
        self.push_term(i, j, left, var, false, right, scale)
    }

    /// Add `scale · left · Xᵀ · right` to cell `(i,j)`.
    pub fn term_transposed(
        &mut self,
        i: usize,
        j: usize,
        left: &Matrix,
        var: &VariableRef,
        right: &Matrix,
        scale: f64,
    ) -> &mut Self {
        self.push_term(i, j, left, var, true, right, scale)
    }

    fn push_term(
        &mut self,
        i: usize,
        j: usize,
        left: &Matrix,
        var: &VariableRef,
        transposed: bool,
        right: &Matrix,
        scale: f64,
    ) -> &mut Self {
        let (ri, cj) = (self.dims[i], self.dims[j]);
        let (vr, vc) = match &var.kind {
            VarKind::Scalar => (left.cols(), right.rows()),
            VarKind::Symmetric(n) => (*n, *n),
            VarKind::Rectangular { rows, cols, .. } => {
                if transposed {
                    (*cols, *rows)
                } else {
                    (*rows, *cols)
                }
            }
        };
        assert_eq!(left.rows(), ri, "term left rows in cell ({i},{j}) for `{}`", var.name);
        assert_eq!(left.cols(), vr, "term left/variable contraction for `{}`", var.name);
        assert_eq!(right.rows(), vc, "term variable/right contraction for `{}`", var.name);
        assert_eq!(right.cols(), cj, "term right cols in cell ({i},{j}) for `{}`", var.name);
        let term = Term { left: left.clone(), var: var.id, transposed, right: right.clone(), scale };
        self.cell_mut(i, j).terms.push(term);
        self
    }

    /// Add `scale · x · I` for a scalar variable on diagonal cell `i`.
    pub fn scalar_identity(&mut self, i: usize, var: &VariableRef, scale: f64) -> &mut Self {
        assert!(matches!(var.kind, VarKind::Scalar), "`{}` is not scalar", var.name);
        let n = self.dims[i];
        let ident = Matrix::identity(n);
        self.push_term(i, i, &ident, var, false, &ident, scale)
    }

    pub fn build(self) -> AffineBlockExpr {
        AffineBlockExpr { dims: self.dims, cells: self.cells }
    }
}

/// A value bound to a variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(f64),
    Matrix(Matrix),
}

/// Map from variables to values, validated against each variable's
/// declared structure (symmetry, zero mask).
#[derive(Debug, Clone, Default)]
pub struct Assignment {
    values: BTreeMap<usize, (VariableRef, Value)>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_scalar(&mut self, var: &VariableRef, x: f64) -> Result<(), LmiError> {
        match var.kind {
            VarKind::Scalar => {
                self.values.insert(var.id, (var.clone(), Value::Scalar(x)));
                Ok(())
            }
            _ => Err(LmiError::BadValue(var.name.clone(), "expected a matrix value".into())),
        }
    }

    pub fn set_matrix(&mut self, var: &VariableRef, m: Matrix) -> Result<(), LmiError> {
        match &var.kind {
            VarKind::Scalar => Err(LmiError::BadValue(var.name.clone(), "expected a scalar value".into())),
            VarKind::Symmetric(n) => {
                if m.rows() != *n || m.cols() != *n {
                    return Err(LmiError::BadValue(
                        var.name.clone(),
                        format!("expected {n}x{n}, got {}x{}", m.rows(), m.cols()),
                    ));
                }
                let s = SymmetricMatrix::new(m)
                    .map_err(|e| LmiError::BadValue(var.name.clone(), e.to_string()))?;
                self.values.insert(var.id, (var.clone(), Value::Matrix(s.into_matrix())));
                Ok(())
            }
            VarKind::Rectangular { rows, cols, zero_mask } => {
                if m.rows() != *rows || m.cols() != *cols {
                    return Err(LmiError::BadValue(
                        var.name.clone(),
                        format!("expected {rows}x{cols}, got {}x{}", m.rows(), m.cols()),
                    ));
                }
                if let Some(mask) = zero_mask {
                    for i in 0..*rows {
                        for j in 0..*cols {
                            if mask[i * cols + j] && m[(i, j)] != 0.0 {
                                return Err(LmiError::BadValue(
                                    var.name.clone(),
                                    format!("masked entry ({i},{j}) must be exactly 0"),
                                ));
                            }
                        }
                    }
                }
                self.values.insert(var.id, (var.clone(), Value::Matrix(m)));
                Ok(())
            }
        }
    }

    pub fn scalar(&self, var: &VariableRef) -> Option<f64> {
        match self.values.get(&var.id) {
            Some((_, Value::Scalar(x))) => Some(*x),
            _ => None,
        }
    }

    pub fn matrix(&self, var: &VariableRef) -> Option<&Matrix> {
        match self.values.get(&var.id) {
            Some((_, Value::Matrix(m))) => Some(m),
            _ => None,
        }
    }

    fn value_by_id(&self, id: usize) -> Option<&Value> {
        self.values.get(&id).map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VariableRef, &Value)> {
        self.values.values().map(|(v, x)| (v, x))
    }
}

/// Substitute `a` into `expr`, assemble the full grid and return the
/// symmetric result.
pub fn evaluate(expr: &AffineBlockExpr, a: &Assignment) -> Result<SymmetricMatrix, LmiError> {
    let nb = expr.dims.len();
    let dim = expr.dim();
    let offsets: Vec<usize> = expr
        .dims
        .iter()
        .scan(0usize, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let mut out = Matrix::zeros(dim, dim);
    for i in 0..nb {
        for j in i..nb {
            let cell = expr.cell(i, j);
            if cell.is_empty() {
                continue;
            }
            let mut block = Matrix::zeros(expr.dims[i], expr.dims[j]);
            if let Some(c) = &cell.constant {
                block.add_assign(c);
            }
            for t in &cell.terms {
                let value = a
                    .value_by_id(t.var)
                    .ok_or_else(|| LmiError::MissingVariable(format!("id {}", t.var)))?;
                match value {
                    Value::Scalar(x) => {
                        if t.left.cols() != t.right.rows() {
                            return Err(LmiError::DimensionMismatch(
                                "scalar term left/right contraction".into(),
                            ));
                        }
                        block.add_scaled(&t.left.matmul(&t.right), t.scale * x);
                    }
                    Value::Matrix(m) => {
                        let mid = if t.transposed { m.transpose() } else { m.clone() };
                        if t.left.cols() != mid.rows() || mid.cols() != t.right.rows() {
                            return Err(LmiError::DimensionMismatch(format!(
                                "term {}x{} · {}x{} · {}x{} in cell ({i},{j})",
                                t.left.rows(),
                                t.left.cols(),
                                mid.rows(),
                                mid.cols(),
                                t.right.rows(),
                                t.right.cols()
                            )));
                        }
                        block.add_scaled(&t.left.matmul(&mid).matmul(&t.right), t.scale);
                    }
                }
            }
            out.set_block(offsets[i], offsets[j], &block);
            if i != j {
                out.set_block(offsets[j], offsets[i], &block.transpose());
            }
        }
    }
    SymmetricMatrix::new(out).map_err(LmiError::from)
}

/// Required definiteness of a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `expr ⪯ -δI`
    Nsd,
    /// `expr ⪰ +δI`
    Psd,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Nsd => write!(f, "⪯ -δI"),
            Sense::Psd => write!(f, "⪰ +δI"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub expr: AffineBlockExpr,
    pub sense: Sense,
}

/// An affine LMI feasibility system.
#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    pub variables: Vec<VariableRef>,
    pub constraints: Vec<Constraint>,
    /// Strictness margin δ ≥ 0.
    pub delta: f64,
}

impl FeasibilityProblem {
    pub fn new(variables: Variables, delta: f64) -> Self {
        assert!(delta >= 0.0, "δ must be nonnegative");
        Self { variables: variables.into_decls(), constraints: Vec::new(), delta }
    }

    pub fn add_nsd(&mut self, name: impl Into<String>, expr: AffineBlockExpr) {
        self.check_declared(&expr);
        self.constraints.push(Constraint { name: name.into(), expr, sense: Sense::Nsd });
    }

    pub fn add_psd(&mut self, name: impl Into<String>, expr: AffineBlockExpr) {
        self.check_declared(&expr);
        self.constraints.push(Constraint { name: name.into(), expr, sense: Sense::Psd });
    }

    fn check_declared(&self, expr: &AffineBlockExpr) {
        for id in expr.variables() {
            assert!(
                self.variables.iter().any(|v| v.id == id),
                "constraint uses undeclared variable id {id}"
            );
        }
    }

    pub fn var(&self, name: &str) -> Option<&VariableRef> {
        self.variables.iter().find(|v| v.name == name)
    }
}

/// One row of a [`VerificationReport`].
#[derive(Debug, Clone)]
pub struct ConstraintCheck {
    pub name: String,
    pub sense: Sense,
    /// Max eigenvalue for NSD constraints, min eigenvalue for PSD.
    pub worst_eigenvalue: f64,
    /// Margin relative to the δ-strengthened inequality; nonnegative = satisfied.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub checks: Vec<ConstraintCheck>,
    pub pass: bool,
}

impl VerificationReport {
    /// Name and margin of the most violated (or least satisfied) constraint.
    pub fn worst(&self) -> Option<&ConstraintCheck> {
        self.checks.iter().min_by(|a, b| a.margin.partial_cmp(&b.margin).unwrap())
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:28} {} worst eig {:+.6e} margin {:+.3e}",
                if c.pass { "pass" } else { "FAIL" },
                c.name,
                c.sense,
                c.worst_eigenvalue,
                c.margin
            )?;
        }
        write!(f, "overall: {}", if self.pass { "pass" } else { "FAIL" })
    }
}

/// Recompute every constraint of `p` at `a` and report eigenvalue margins.
///
/// Deterministic and independent of the solve path: evaluation plus the
/// Jacobi eigenvalue kernel, nothing else.
pub fn verify(p: &FeasibilityProblem, a: &Assignment, tol: f64) -> Result<VerificationReport, LmiError> {
    let mut checks = Vec::with_capacity(p.constraints.len());
    let mut pass = true;
    for c in &p.constraints {
        let value = evaluate(&c.expr, a)?;
        let (lo, hi) = extreme_eigenvalues(&value)?;
        let (worst, margin) = match c.sense {
            Sense::Nsd => (hi, -p.delta - hi),
            Sense::Psd => (lo, lo - p.delta),
        };
        let ok = margin >= -tol;
        pass &= ok;
        checks.push(ConstraintCheck {
            name: c.name.clone(),
            sense: c.sense,
            worst_eigenvalue: worst,
            margin,
            pass: ok,
        });
    }
    Ok(VerificationReport { checks, pass })
}

impl Variables {
    fn into_decls(self) -> Vec<VariableRef> {
        self.decls
    }
}
