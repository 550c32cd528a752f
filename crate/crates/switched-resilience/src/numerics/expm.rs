//! Matrix exponential and zero-order-hold discretization.
//!
//! Scaling-and-squaring with the degree-13 Padé approximant at the classic
//! θ₁₃ threshold. No norm estimation refinements; the matrices here are tiny.

use super::factor::Lu;
use super::{Matrix, NumericsError};

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(A)` for square `A`.
pub fn expm(a: &Matrix) -> Result<Matrix, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    let norm = a.norm_inf();
    let s = if norm > THETA_13 {
        ((norm / THETA_13).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let a_scaled = a.scale(0.5f64.powi(s));

    let n = a.rows();
    let b = &PADE_13;
    let a2 = a_scaled.matmul(&a_scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let ident = Matrix::identity(n);

    // u = A (a6 (b13 a6 + b11 a4 + b9 a2) + b7 a6 + b5 a4 + b3 a2 + b1 I)
    let mut w1 = a6.scale(b[13]);
    w1.add_scaled(&a4, b[11]);
    w1.add_scaled(&a2, b[9]);
    let mut w = a6.matmul(&w1);
    w.add_scaled(&a6, b[7]);
    w.add_scaled(&a4, b[5]);
    w.add_scaled(&a2, b[3]);
    w.add_scaled(&ident, b[1]);
    let u = a_scaled.matmul(&w);

    // v = a6 (b12 a6 + b10 a4 + b8 a2) + b6 a6 + b4 a4 + b2 a2 + b0 I
    let mut z1 = a6.scale(b[12]);
    z1.add_scaled(&a4, b[10]);
    z1.add_scaled(&a2, b[8]);
    let mut v = a6.matmul(&z1);
    v.add_scaled(&a6, b[6]);
    v.add_scaled(&a4, b[4]);
    v.add_scaled(&a2, b[2]);
    v.add_scaled(&ident, b[0]);

    // (v - u) r = (v + u)
    let lhs = v.sub(&u);
    let rhs = v.add(&u);
    let lu = Lu::new(&lhs)?;
    let mut r = lu.solve_matrix(&rhs);
    for _ in 0..s {
        r = r.matmul(&r);
    }
    if !r.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    Ok(r)
}

/// Zero-order-hold discretization of `ẋ = A_c x + B_c u` at sampling time `t`.
///
/// Computed through the augmented exponential
/// `exp([[A_c, B_c],[0, 0]]·t) = [[A_d, B_d],[0, I]]`, so
/// `A_d = exp(A_c t)` and `B_d = (∫₀ᵗ exp(A_c s) ds) B_c`.
pub fn zoh_discretize(a_c: &Matrix, b_c: &Matrix, t: f64) -> Result<(Matrix, Matrix), NumericsError> {
    if !a_c.is_square() {
        return Err(NumericsError::DimensionMismatch("A_c must be square".into()));
    }
    if b_c.rows() != a_c.rows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "B_c has {} rows, A_c is {}x{}",
            b_c.rows(),
            a_c.rows(),
            a_c.cols()
        )));
    }
    if !(t > 0.0) {
        return Err(NumericsError::DimensionMismatch("sampling time must be positive".into()));
    }
    let n = a_c.rows();
    let m = b_c.cols();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.set_block(0, 0, &a_c.scale(t));
    aug.set_block(0, n, &b_c.scale(t));
    let e = expm(&aug)?;
    let a_d = e.block(0, 0, n, n);
    let b_d = e.block(0, n, n, m);
    Ok((a_d, b_d))
}
