//! Reference feasibility backend.
//!
//! Phase-I formulation: minimize the uniform slack `t` subject to
//! `A_i(x) ⪯ (t - δ)I` for every constraint (PSD constraints are negated
//! into the same form). The minimization runs a log-det barrier along a
//! κ-path with damped Newton centering. Termination:
//!
//! * success once `t` crosses 0: every constraint then satisfies its sense
//!   with margin strictly greater than δ, which the caller re-checks via
//!   [`verify`](super::verify);
//! * `Infeasible` once the barrier duality gap proves `t* > 0`, i.e. no
//!   assignment reaches margin δ;
//! * `IterationLimit` when the Newton budget runs out first.

use thiserror::Error;

use super::{evaluate, Assignment, FeasibilityProblem, LmiError, Sense, VariableRef, VarKind};
use crate::numerics::{extreme_eigenvalues, Cholesky, Matrix, SymmetricMatrix};

const BOX_BOUND: f64 = 1e8;
const KAPPA_GROWTH: f64 = 8.0;
const KAPPA_MAX: f64 = 1e13;
const MAX_CENTER_STEPS: usize = 60;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Total Newton-step budget across the κ-path.
    pub max_iterations: usize,
    /// Newton decrement threshold declaring a point centered.
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iterations: 8000, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolveFailure {
    /// The δ-strengthened system admits no solution.
    #[error("infeasible: {diagnostic}")]
    Infeasible { diagnostic: String },
    /// The search was inconclusive within the iteration budget.
    #[error("iteration limit: {diagnostic}")]
    IterationLimit { diagnostic: String },
    #[error(transparent)]
    Structural(#[from] LmiError),
}

/// One scalar coordinate of the flattened variable space.
#[derive(Debug, Clone, Copy)]
enum Coord {
    Scalar { var: usize },
    Sym { var: usize, i: usize, j: usize },
    Rect { var: usize, i: usize, j: usize },
}

struct Flattening {
    coords: Vec<Coord>,
    vars: Vec<VariableRef>,
}

impl Flattening {
    fn new(vars: &[VariableRef]) -> Self {
        let mut coords = Vec::new();
        for v in vars {
            match &v.kind {
                VarKind::Scalar => coords.push(Coord::Scalar { var: v.id }),
                VarKind::Symmetric(n) => {
                    for i in 0..*n {
                        for j in i..*n {
                            coords.push(Coord::Sym { var: v.id, i, j });
                        }
                    }
                }
                VarKind::Rectangular { rows, cols, zero_mask } => {
                    for i in 0..*rows {
                        for j in 0..*cols {
                            let zero = zero_mask.as_ref().map(|m| m[i * cols + j]).unwrap_or(false);
                            if !zero {
                                coords.push(Coord::Rect { var: v.id, i, j });
                            }
                        }
                    }
                }
            }
        }
        Self { coords, vars: vars.to_vec() }
    }

    fn assignment(&self, x: &[f64]) -> Result<Assignment, LmiError> {
        let mut a = Assignment::new();
        for v in &self.vars {
            match &v.kind {
                VarKind::Scalar => a.set_scalar(v, 0.0)?,
                VarKind::Symmetric(n) => a.set_matrix(v, Matrix::zeros(*n, *n))?,
                VarKind::Rectangular { rows, cols, .. } => {
                    a.set_matrix(v, Matrix::zeros(*rows, *cols))?
                }
            }
        }
        // overwrite with coordinate values
        let mut scalars: std::collections::BTreeMap<usize, f64> = Default::default();
        let mut matrices: std::collections::BTreeMap<usize, Matrix> = Default::default();
        for v in &self.vars {
            match &v.kind {
                VarKind::Scalar => {}
                VarKind::Symmetric(n) => {
                    matrices.insert(v.id, Matrix::zeros(*n, *n));
                }
                VarKind::Rectangular { rows, cols, .. } => {
                    matrices.insert(v.id, Matrix::zeros(*rows, *cols));
                }
            }
        }
        for (k, c) in self.coords.iter().enumerate() {
            match *c {
                Coord::Scalar { var } => {
                    scalars.insert(var, x[k]);
                }
                Coord::Sym { var, i, j } => {
                    let m = matrices.get_mut(&var).unwrap();
                    m[(i, j)] = x[k];
                    m[(j, i)] = x[k];
                }
                Coord::Rect { var, i, j } => {
                    let m = matrices.get_mut(&var).unwrap();
                    m[(i, j)] = x[k];
                }
            }
        }
        for v in &self.vars {
            match &v.kind {
                VarKind::Scalar => a.set_scalar(v, scalars.get(&v.id).copied().unwrap_or(0.0))?,
                _ => a.set_matrix(v, matrices.remove(&v.id).unwrap())?,
            }
        }
        Ok(a)
    }
}

/// Precomputed affine data of one constraint in slack form `A(x) ⪯ (t-δ)I`.
struct ConstraintData {
    f0: Matrix,
    /// (coordinate index, derivative matrix)
    derivs: Vec<(usize, Matrix)>,
    dim: usize,
}

impl ConstraintData {
    fn value(&self, x: &[f64]) -> Matrix {
        let mut a = self.f0.clone();
        for (k, fk) in &self.derivs {
            let xk = x[*k];
            if xk != 0.0 {
                a.add_scaled(fk, xk);
            }
        }
        a
    }
}

fn build_constraint_data(
    p: &FeasibilityProblem,
    flat: &Flattening,
) -> Result<Vec<ConstraintData>, LmiError> {
    let zero = flat.assignment(&vec![0.0; flat.coords.len()])?;
    let mut out = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let sign = match c.sense {
            Sense::Nsd => 1.0,
            Sense::Psd => -1.0,
        };
        let f0 = evaluate(&c.expr, &zero)?.into_matrix().scale(sign);
        let used = c.expr.variables();
        let mut derivs = Vec::new();
        for (k, coord) in flat.coords.iter().enumerate() {
            let var_id = match coord {
                Coord::Scalar { var } | Coord::Sym { var, .. } | Coord::Rect { var, .. } => *var,
            };
            if !used.contains(&var_id) {
                continue;
            }
            let mut xe = vec![0.0; flat.coords.len()];
            xe[k] = 1.0;
            let unit = flat.assignment(&xe)?;
            let fk = evaluate(&c.expr, &unit)?.into_matrix().scale(sign).sub(&f0);
            if fk.norm_max() > 0.0 {
                derivs.push((k, fk));
            }
        }
        let dim = f0.rows();
        out.push(ConstraintData { f0, derivs, dim });
    }
    Ok(out)
}

struct BarrierEval {
    /// Cholesky factors of the slack matrices, in constraint order.
    chols: Vec<Cholesky>,
    phi: f64,
}

/// Evaluate barrier feasibility and value at `(x, t)`.
fn barrier(cons: &[ConstraintData], x: &[f64], t: f64, delta: f64) -> Option<BarrierEval> {
    if x.iter().any(|v| v.abs() >= BOX_BOUND) {
        return None;
    }
    let mut chols = Vec::with_capacity(cons.len());
    let mut phi = 0.0;
    for c in cons {
        let a = c.value(x);
        let mut s = a.scale(-1.0);
        for i in 0..c.dim {
            s[(i, i)] += t - delta;
        }
        let ch = Cholesky::new(&s).ok()?;
        phi -= ch.log_det();
        chols.push(ch);
    }
    for &v in x {
        phi -= (BOX_BOUND - v).ln() + (BOX_BOUND + v).ln();
    }
    Some(BarrierEval { chols, phi })
}

/// Solve the feasibility system, returning an assignment that passes
/// [`verify`](super::verify) with margin ≥ δ, or a failure verdict.
///
/// The backend is pluggable behind this signature; any algorithm emitting
/// verifiable certificates is acceptable. This reference implementation is
/// the barrier method described in the module docs.
pub fn solve_feasibility(
    p: &FeasibilityProblem,
    opts: &SolveOptions,
) -> Result<Assignment, SolveFailure> {
    let flat = Flattening::new(&p.variables);
    let n = flat.coords.len();
    if p.constraints.is_empty() {
        return Ok(flat.assignment(&vec![0.0; n]).map_err(SolveFailure::Structural)?);
    }
    let cons = build_constraint_data(p, &flat).map_err(SolveFailure::Structural)?;

    let mut x = vec![0.0; n];
    let mut t = {
        let mut worst = f64::NEG_INFINITY;
        for c in &cons {
            let s = SymmetricMatrix::symmetrize(c.f0.clone())
                .map_err(|e| SolveFailure::Structural(e.into()))?;
            let (_, hi) = extreme_eigenvalues(&s).map_err(|e| SolveFailure::Structural(e.into()))?;
            worst = worst.max(hi);
        }
        p.delta + worst + 1.0
    };

    // barrier parameter: Σ constraint dims + box terms
    let nu: f64 = cons.iter().map(|c| c.dim as f64).sum::<f64>() + 2.0 * n as f64;
    let t_goal = if p.delta > 0.0 { -0.25 * p.delta } else { -1e-12 };

    let mut kappa = 1.0_f64;
    let mut spent = 0usize;
    let mut centered_gap_proof = false;

    'outer: while spent < opts.max_iterations {
        // Newton centering of κ·t + φ(x, t)
        let mut decrement = f64::INFINITY;
        for _ in 0..MAX_CENTER_STEPS {
            if spent >= opts.max_iterations {
                break;
            }
            spent += 1;
            let eval = match barrier(&cons, &x, t, p.delta) {
                Some(e) => e,
                None => {
                    return Err(SolveFailure::IterationLimit {
                        diagnostic: "barrier evaluation left the feasible cone".into(),
                    })
                }
            };

            // gradient and Hessian over (x, t)
            let m = n + 1;
            let mut grad = vec![0.0; m];
            let mut hess = vec![0.0; m * m];
            grad[n] += kappa;
            for (ci, c) in cons.iter().enumerate() {
                let ch = &eval.chols[ci];
                // whitened derivative matrices; index n plays the role of t
                let mut ws: Vec<(usize, Matrix)> = Vec::with_capacity(c.derivs.len() + 1);
                for (k, fk) in &c.derivs {
                    ws.push((*k, ch.whiten(fk)));
                }
                let ident = Matrix::identity(c.dim);
                ws.push((n, ch.whiten(&ident).scale(-1.0)));
                for (a, wa) in &ws {
                    let tr: f64 = (0..c.dim).map(|i| wa[(i, i)]).sum();
                    grad[*a] += tr;
                    for (b, wb) in &ws {
                        if b < a {
                            continue;
                        }
                        let dot: f64 =
                            wa.data().iter().zip(wb.data().iter()).map(|(p, q)| p * q).sum();
                        hess[a * m + b] += dot;
                        if a != b {
                            hess[b * m + a] += dot;
                        }
                    }
                }
            }
            for k in 0..n {
                grad[k] += 1.0 / (BOX_BOUND - x[k]) - 1.0 / (BOX_BOUND + x[k]);
                let h = 1.0 / ((BOX_BOUND - x[k]) * (BOX_BOUND - x[k]))
                    + 1.0 / ((BOX_BOUND + x[k]) * (BOX_BOUND + x[k]));
                hess[k * m + k] += h;
            }

            // damped Newton step with ridge fallback
            let mut ridge = 0.0;
            let dir = loop {
                let mut h = Matrix::from_fn(m, m, |i, j| hess[i * m + j]);
                if ridge > 0.0 {
                    for i in 0..m {
                        h[(i, i)] += ridge;
                    }
                }
                match Cholesky::new(&h) {
                    Ok(ch) => {
                        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                        break ch.solve_vec(&neg);
                    }
                    Err(_) => {
                        ridge = if ridge == 0.0 { 1e-10 } else { ridge * 100.0 };
                        if ridge > 1e12 {
                            return Err(SolveFailure::IterationLimit {
                                diagnostic: "Newton system irreparably ill-conditioned".into(),
                            });
                        }
                    }
                }
            };
            decrement = -grad.iter().zip(&dir).map(|(g, d)| g * d).sum::<f64>();
            if !decrement.is_finite() {
                return Err(SolveFailure::IterationLimit {
                    diagnostic: "non-finite Newton decrement".into(),
                });
            }
            if decrement <= opts.tolerance {
                break;
            }

            let f0 = kappa * t + eval.phi;
            let g_dot_d = -decrement;
            let mut alpha = 1.0_f64;
            let mut moved = false;
            while alpha > 1e-14 {
                let xt: Vec<f64> = x.iter().zip(&dir[..n]).map(|(v, d)| v + alpha * d).collect();
                let tt = t + alpha * dir[n];
                if let Some(ev) = barrier(&cons, &xt, tt, p.delta) {
                    let f1 = kappa * tt + ev.phi;
                    if f1 <= f0 + 0.25 * alpha * g_dot_d {
                        x = xt;
                        t = tt;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break; // stalled; let the outer loop decide
            }
        }

        // verdicts at the (approximately) centered point
        if t <= t_goal {
            let a = flat.assignment(&x).map_err(SolveFailure::Structural)?;
            if super::verify(p, &a, 0.0).map_err(SolveFailure::Structural)?.pass {
                return Ok(a);
            }
            // margins not yet certified: tighten further
        }
        let centered = decrement <= opts.tolerance.max(1e-7);
        if centered && t - nu / kappa > 0.0 {
            centered_gap_proof = true;
            break 'outer;
        }
        if kappa >= KAPPA_MAX {
            break 'outer;
        }
        kappa *= KAPPA_GROWTH;
    }

    let a = flat.assignment(&x).map_err(SolveFailure::Structural)?;
    let report = super::verify(p, &a, 0.0).map_err(SolveFailure::Structural)?;
    if report.pass {
        return Ok(a);
    }
    let diagnostic = match report.worst() {
        Some(w) => format!(
            "most violated constraint `{}` ({}) with worst eigenvalue {:+.6e} at the best iterate",
            w.name, w.sense, w.worst_eigenvalue
        ),
        None => "no constraints".into(),
    };
    if centered_gap_proof {
        Err(SolveFailure::Infeasible { diagnostic })
    } else {
        Err(SolveFailure::IterationLimit { diagnostic })
    }
}
