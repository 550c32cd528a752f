//! Augmented closed-loop matrices for each channel stage, plus an exact
//! enumeration oracle for one-step expected quadratic forms.
//!
//! The augmented state is fixed as `x̃(k) = [x(k); x̄(k-1)]`. Three stages
//! occur at runtime:
//!
//! * synchronous — controller mode matches the plant mode;
//! * asynchronous — a switch happened under sustained DoS, the controller is
//!   stuck on the previous mode;
//! * resynchronizing — the first successful transmission after a switch.
//!
//! [`expected_step_quadratic`] computes `E[x̃(k+1)ᵀ P x̃(k+1)]` by summing
//! over the Bernoulli outcomes with the raw channel semantics. It never
//! touches the assembled matrices, so it serves as the independent oracle
//! for every closed-form expansion in the analysis layer.

use thiserror::Error;

use crate::model::{AttackCoupling, AttackParameters, GainSet, SwitchedPlant};
use crate::numerics::{assemble_block, Matrix, SymmetricMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedLoopError {
    #[error("mode index {0} out of range (m = {1})")]
    BadMode(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// The four synchronous-stage matrices and the delivery coefficient χ₃.
#[derive(Debug, Clone)]
pub struct SyncMatrices {
    /// Mean dynamics `[[A+χ₃BK, β̄BK],[χ₃I, β̄I]]`.
    pub a1: Matrix,
    /// DoS direction `[[0, BK],[0, I]]` (zero left block-column).
    pub a2: Matrix,
    /// Delivery direction `[[BK, 0],[I, 0]]` (zero right block-column).
    pub a3: Matrix,
    /// Payload injection `[BK; I]`.
    pub a4: Matrix,
    /// χ₃ = 1 - ᾱ - β̄ + ᾱβ̄.
    pub chi3: f64,
}

/// The resynchronizing-stage matrices (first delivery after a switch).
#[derive(Debug, Clone)]
pub struct ResyncMatrices {
    /// `[[A+(1-ᾱ)BK, 0],[(1-ᾱ)I, 0]]`
    pub at1: Matrix,
    /// `[[BK, 0],[I, 0]]`
    pub at2: Matrix,
    /// `[BK; I]`
    pub at3: Matrix,
}

fn check_mode(plant: &SwitchedPlant, p: usize) -> Result<(), ClosedLoopError> {
    if p >= plant.mode_count() {
        return Err(ClosedLoopError::BadMode(p, plant.mode_count()));
    }
    Ok(())
}

fn bk(plant: &SwitchedPlant, gains: &GainSet, plant_mode: usize, gain_mode: usize) -> Matrix {
    plant.mode(plant_mode).b.matmul(gains.gain(gain_mode))
}

/// Synchronous-stage matrices for mode `p` (0-based).
pub fn sync_matrices(
    plant: &SwitchedPlant,
    gains: &GainSet,
    attack: &AttackParameters,
    p: usize,
) -> Result<SyncMatrices, ClosedLoopError> {
    check_mode(plant, p)?;
    let n = plant.state_dim();
    let ident = Matrix::identity(n);
    let chi3 = attack.chi3();
    let beta = attack.beta_bar;
    let bk = bk(plant, gains, p, p);
    let a = &plant.mode(p).a;

    let a1 = assemble_block(&[
        vec![Some(&a.add(&bk.scale(chi3))), Some(&bk.scale(beta))],
        vec![Some(&ident.scale(chi3)), Some(&ident.scale(beta))],
    ])
    .expect("consistent block dimensions");
    let a2 = assemble_block(&[vec![None, Some(&bk)], vec![None, Some(&ident)]])
        .expect("consistent block dimensions");
    let a3 = assemble_block(&[vec![Some(&bk), None], vec![Some(&ident), None]])
        .expect("consistent block dimensions");
    let a4 = assemble_block(&[vec![Some(&bk)], vec![Some(&ident)]])
        .expect("consistent block dimensions");
    Ok(SyncMatrices { a1, a2, a3, a4, chi3 })
}

/// Asynchronous-stage matrix `[[A_p, B_p K_q],[0, I]]` with active mode `p`
/// and held controller mode `q`.
pub fn async_matrix(
    plant: &SwitchedPlant,
    gains: &GainSet,
    p: usize,
    q: usize,
) -> Result<Matrix, ClosedLoopError> {
    check_mode(plant, p)?;
    check_mode(plant, q)?;
    let ident = Matrix::identity(plant.state_dim());
    let bkq = bk(plant, gains, p, q);
    Ok(assemble_block(&[
        vec![Some(&plant.mode(p).a), Some(&bkq)],
        vec![None, Some(&ident)],
    ])
    .expect("consistent block dimensions"))
}

/// Resynchronizing-stage matrices for mode `p`.
pub fn resync_matrices(
    plant: &SwitchedPlant,
    gains: &GainSet,
    attack: &AttackParameters,
    p: usize,
) -> Result<ResyncMatrices, ClosedLoopError> {
    check_mode(plant, p)?;
    let n = plant.state_dim();
    let ident = Matrix::identity(n);
    let one_ma = 1.0 - attack.alpha_bar;
    let bk = bk(plant, gains, p, p);
    let a = &plant.mode(p).a;

    let at1 = assemble_block(&[
        vec![Some(&a.add(&bk.scale(one_ma))), None],
        vec![Some(&ident.scale(one_ma)), None],
    ])
    .expect("consistent block dimensions");
    let at2 = assemble_block(&[vec![Some(&bk), None], vec![Some(&ident), None]])
        .expect("consistent block dimensions");
    let at3 = assemble_block(&[vec![Some(&bk)], vec![Some(&ident)]])
        .expect("consistent block dimensions");
    Ok(ResyncMatrices { at1, at2, at3 })
}

/// Which channel stage the one-step expectation runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sync,
    /// The DoS bit is forced to 0 (a transmission just succeeded).
    Resync,
}

/// `E[x̃(k+1)ᵀ P x̃(k+1)]` by exact enumeration of the attack outcomes.
///
/// The propagation applies the raw channel law per outcome:
/// `x̄(k) = (1-α)(1-β)x + β x̄(k-1) + α(1-β) x_a`, then
/// `x(k+1) = A_p x + B_p K_p x̄(k)`. The synchronous stage sums over
/// `(α,β) ∈ {0,1}²` (mutually-exclusive coupling drops the (1,1) outcome and
/// uses probabilities 1-ᾱ-β̄, ᾱ, β̄); the resync stage sums over α only with
/// β = 0 forced. The payload bound is not enforced here; the oracle accepts
/// any `x_a`.
#[allow(clippy::too_many_arguments)]
pub fn expected_step_quadratic(
    p_matrix: &SymmetricMatrix,
    stage: Stage,
    plant: &SwitchedPlant,
    gains: &GainSet,
    attack: &AttackParameters,
    p: usize,
    x_tilde: &[f64],
    x_a: &[f64],
) -> Result<f64, ClosedLoopError> {
    check_mode(plant, p)?;
    let n = plant.state_dim();
    if x_tilde.len() != 2 * n {
        return Err(ClosedLoopError::DimensionMismatch(format!(
            "x_tilde must have length {}, got {}",
            2 * n,
            x_tilde.len()
        )));
    }
    if x_a.len() != n {
        return Err(ClosedLoopError::DimensionMismatch(format!(
            "x_a must have length {n}, got {}",
            x_a.len()
        )));
    }
    if p_matrix.dim() != 2 * n {
        return Err(ClosedLoopError::DimensionMismatch(format!(
            "P must be {0}x{0}",
            2 * n
        )));
    }

    let mode = plant.mode(p);
    let k = gains.gain(p);
    let x = &x_tilde[..n];
    let xbar_prev = &x_tilde[n..];

    let outcomes: Vec<(f64, u8, u8)> = match stage {
        Stage::Sync => match attack.coupling {
            AttackCoupling::Independent => {
                let (ab, bb) = (attack.alpha_bar, attack.beta_bar);
                vec![
                    ((1.0 - ab) * (1.0 - bb), 0, 0),
                    (ab * (1.0 - bb), 1, 0),
                    ((1.0 - ab) * bb, 0, 1),
                    (ab * bb, 1, 1),
                ]
            }
            AttackCoupling::MutuallyExclusive => {
                let (ab, bb) = (attack.alpha_bar, attack.beta_bar);
                vec![(1.0 - ab - bb, 0, 0), (ab, 1, 0), (bb, 0, 1)]
            }
        },
        Stage::Resync => {
            let ab = attack.alpha_bar;
            vec![(1.0 - ab, 0, 0), (ab, 1, 0)]
        }
    };

    let mut expectation = 0.0;
    for (w, alpha, beta) in outcomes {
        if w == 0.0 {
            continue;
        }
        let (af, bf) = (alpha as f64, beta as f64);
        // channel law
        let mut xbar = vec![0.0; n];
        for i in 0..n {
            xbar[i] = (1.0 - af) * (1.0 - bf) * x[i] + bf * xbar_prev[i] + af * (1.0 - bf) * x_a[i];
        }
        // plant step under the synchronous controller u = K_p x̄(k)
        let u = k.matvec(&xbar);
        let ax = mode.a.matvec(x);
        let bu = mode.b.matvec(&u);
        let mut next = vec![0.0; 2 * n];
        for i in 0..n {
            next[i] = ax[i] + bu[i];
            next[n + i] = xbar[i];
        }
        expectation += w * p_matrix.quad_form(&next);
    }
    Ok(expectation)
}
