//! Mean-square practical-stability analysis for a given gain set.
//!
//! [`assemble_theorem1`] builds the LMI system over `{P_p, ε}` whose
//! feasibility certifies practical stability in the mean square sense under
//! the time-dependent switching law; [`analyze`] solves it. The companion
//! scalar formulas give the minimum dwell time τ_d*, the security level ℓ,
//! the asymptotic bound ψ and the decaying envelope.
//!
//! The synchronous-stage condition is the exact one-step expectation: the
//! cross term carries coefficient `-β̃(1-ᾱ)` on `(𝒜²)ᵀP𝒜³ + (𝒜³)ᵀP𝒜²`,
//! the sign that matches the enumeration oracle in [`crate::closedloop`]
//! (tested to 1e-10). With that sign the solved certificate guarantees
//! `E{ΔV} ≤ -ρ_s V + ε γ̄²` pointwise, which the property tests exercise.

use thiserror::Error;

use crate::closedloop::{
    async_matrix, resync_matrices, sync_matrices, ClosedLoopError, ResyncMatrices, SyncMatrices,
};
use crate::lmi::{
    evaluate, solve_feasibility, verify, Assignment, ExprBuilder, FeasibilityProblem, LmiError,
    SolveFailure, SolveOptions, VariableRef, Variables, VerificationReport,
};
use crate::model::{AttackCoupling, AttackParameters, DesignParameters, GainSet, SwitchedPlant};
use crate::numerics::{extreme_eigenvalues, Matrix, NumericsError, SymmetricMatrix};

#[derive(Debug, Clone, Error)]
pub enum AnalysisError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver inconclusive: {0}")]
    Inconclusive(String),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    ClosedLoop(#[from] ClosedLoopError),
}

impl From<SolveFailure> for AnalysisError {
    fn from(f: SolveFailure) -> Self {
        match f {
            SolveFailure::Infeasible { diagnostic } => AnalysisError::Infeasible(diagnostic),
            SolveFailure::IterationLimit { diagnostic } => AnalysisError::Inconclusive(diagnostic),
            SolveFailure::Structural(e) => AnalysisError::Lmi(e),
        }
    }
}

/// Which attack pattern the certificate covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Both attacks on a switched plant.
    Full,
    /// Single mode (m = 1); no switching machinery.
    NonSwitched,
    /// DoS only: ᾱ = γ̄ = 0 forced.
    DosOnly,
    /// Deception only: β̄ = 0 forced; no asynchronous stage exists.
    DeceptionOnly,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Full => "full",
            Regime::NonSwitched => "non-switched",
            Regime::DosOnly => "dos-only",
            Regime::DeceptionOnly => "deception-only",
        }
    }

    /// Apply the regime's parameter zeroing.
    pub fn effective_attack(&self, attack: &AttackParameters) -> AttackParameters {
        let mut a = *attack;
        match self {
            Regime::DosOnly => {
                a.alpha_bar = 0.0;
                a.gamma_bar = 0.0;
            }
            Regime::DeceptionOnly => {
                a.beta_bar = 0.0;
            }
            _ => {}
        }
        a
    }

    /// Energy-jump factor entering τ_d*, ℓ and ψ for this regime.
    pub fn mu_bar(&self, design: &DesignParameters, attack: &AttackParameters) -> f64 {
        match self {
            Regime::Full | Regime::DosOnly => design.mu_bar(attack),
            Regime::DeceptionOnly => design.mu,
            Regime::NonSwitched => 1.0,
        }
    }
}

/// Result of a successful analysis solve.
#[derive(Debug, Clone)]
pub struct AnalysisCertificate {
    pub regime: Regime,
    /// One 2n_x Lyapunov matrix per mode.
    pub p_mats: Vec<SymmetricMatrix>,
    pub eps: f64,
    /// Solver margins at the returned assignment.
    pub report: VerificationReport,
    pub design: DesignParameters,
    /// Attack parameters after regime zeroing.
    pub attack: AttackParameters,
    pub delta: f64,
}

impl AnalysisCertificate {
    pub fn lambda_min_floor(&self) -> f64 {
        self.p_mats
            .iter()
            .map(|p| extreme_eigenvalues(p).expect("finite certificate").0)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Security-level and envelope constants derived from a certificate.
///
/// `envelope_gain` and `envelope_rate` are the constants of the decaying
/// envelope `E‖x̃(k)‖² ≤ envelope_gain·‖x(0)‖²·envelope_rate^k + ψ`; they
/// deliberately carry their own names because the envelope's gain constant
/// is unrelated to the LMI slack ε.
#[derive(Debug, Clone)]
pub struct SecurityReport {
    /// Minimum dwell time in (real-valued) steps; callers ceil to schedule.
    pub tau_d_star: f64,
    /// Uniform bound on E‖x̃(k)‖² from the initial state σ(0) = mode 1.
    pub ell: f64,
    /// Worst ℓ over all choices of the initial mode.
    pub ell_worst_initial_mode: f64,
    /// Asymptotic bound of E‖x̃(k)‖².
    pub psi: f64,
    pub envelope_gain: f64,
    /// Decay rate of the envelope, in [0,1).
    pub envelope_rate: f64,
    pub lambda_min_floor: f64,
    /// Cap of the geometric noise sum, 1/ρ_s.
    pub g2_cap: f64,
}

/// Minimum dwell time τ_d* = -ln μ̄ / ln(1-ρ_s) with μ̄ = μ(2-β̄-c)/(1-c).
///
/// Requires c < 1. A degenerate μ̄ ≤ 1 yields τ_d* = 0 (switching is free).
pub fn min_dwell_time(design: &DesignParameters, attack: &AttackParameters) -> Result<f64, AnalysisError> {
    let c = design.c(attack);
    if !(c < 1.0) {
        return Err(AnalysisError::Precondition(format!(
            "c = {c:.6} must stay below 1 for the dwell-time bound"
        )));
    }
    let mu_bar = design.mu_bar(attack);
    Ok(dwell_from_mu_bar(mu_bar, design.rho_s))
}

fn dwell_from_mu_bar(mu_bar: f64, rho_s: f64) -> f64 {
    if mu_bar <= 1.0 {
        0.0
    } else {
        -mu_bar.ln() / (1.0 - rho_s).ln()
    }
}

/// Term recipes of the one-step expected quadratic form, written over the
/// stage matrices. Index convention for the synchronous stage:
/// 0 = 𝒜¹, 1 = 𝒜², 2 = 𝒜³; the payload column always pairs with 𝒜⁴.
struct StepTerms {
    /// (coefficient, left index, right index) of `LᵀPR` terms in the x̃ block.
    xx: Vec<(f64, usize, usize)>,
    /// (coefficient, left index) of `LᵀP𝒜⁴` terms in the cross block.
    xa: Vec<(f64, usize)>,
    /// Coefficient of `(𝒜⁴)ᵀP𝒜⁴` in the payload block.
    aa: f64,
}

fn sync_step_terms(attack: &AttackParameters) -> StepTerms {
    let ab = attack.alpha_bar;
    let bb = attack.beta_bar;
    let at = attack.alpha_tilde();
    let bt = attack.beta_tilde();
    match attack.coupling {
        AttackCoupling::Independent => {
            let coef_a3 = at * (1.0 - bb) * (1.0 - bb) + bt * (1.0 - ab) * (1.0 - ab) + at * bt;
            let cross = -bt * (1.0 - ab);
            StepTerms {
                xx: vec![
                    (1.0, 0, 0),
                    (bt, 1, 1),
                    (coef_a3, 2, 2),
                    (cross, 1, 2),
                    (cross, 2, 1),
                ],
                xa: vec![
                    (ab * (1.0 - bb), 0),
                    (-ab * bt, 1),
                    (-at * (1.0 - bb) * (1.0 - bb), 2),
                ],
                aa: ab * (1.0 - bb),
            }
        }
        AttackCoupling::MutuallyExclusive => {
            let p_d = attack.deliver_probability();
            let chi3 = attack.chi3();
            StepTerms {
                xx: vec![
                    (1.0, 0, 0),
                    (bt, 1, 1),
                    (p_d * (1.0 - p_d) + ab * ab * bb * bb, 2, 2),
                    (-ab * bb, 0, 2),
                    (-ab * bb, 2, 0),
                    (-bb * p_d, 1, 2),
                    (-bb * p_d, 2, 1),
                ],
                xa: vec![(ab, 0), (-ab * bb, 1), (-ab * chi3, 2)],
                aa: ab,
            }
        }
    }
}

fn resync_step_terms(attack: &AttackParameters) -> StepTerms {
    let ab = attack.alpha_bar;
    let at = attack.alpha_tilde();
    StepTerms {
        xx: vec![(1.0, 0, 0), (at, 1, 1)],
        xa: vec![(ab, 0), (-at, 1)],
        aa: ab,
    }
}

fn step_matrix(mats: &[&Matrix], payload: &Matrix, terms: &StepTerms, p: &SymmetricMatrix) -> Matrix {
    let two_n = mats[0].rows();
    let n = payload.cols();
    let pm = p.as_matrix();
    let mut out = Matrix::zeros(two_n + n, two_n + n);
    let mut s11 = Matrix::zeros(two_n, two_n);
    for &(c, l, r) in &terms.xx {
        s11.add_scaled(&mats[l].transpose().matmul(pm).matmul(mats[r]), c);
    }
    let mut s12 = Matrix::zeros(two_n, n);
    for &(c, l) in &terms.xa {
        s12.add_scaled(&mats[l].transpose().matmul(pm).matmul(payload), c);
    }
    let s22 = payload.transpose().matmul(pm).matmul(payload).scale(terms.aa);
    out.set_block(0, 0, &s11);
    out.set_block(0, two_n, &s12);
    out.set_block(two_n, 0, &s12.transpose());
    out.set_block(two_n, two_n, &s22);
    out
}

/// Closed-form matrix `S` with `E[x̃(k+1)ᵀPx̃(k+1)] = ξᵀSξ`,
/// `ξ = [x̃; x_a]`, for the synchronous stage. This is the quadratic form
/// the enumeration oracle must reproduce.
pub fn sync_step_quadratic_matrix(
    plant: &SwitchedPlant,
    gains: &GainSet,
    attack: &AttackParameters,
    p: usize,
    p_mat: &SymmetricMatrix,
) -> Result<Matrix, ClosedLoopError> {
    let sm = sync_matrices(plant, gains, attack, p)?;
    let terms = sync_step_terms(attack);
    Ok(step_matrix(&[&sm.a1, &sm.a2, &sm.a3], &sm.a4, &terms, p_mat))
}

/// Closed-form `S` for the resynchronizing stage (β = 0 forced).
pub fn resync_step_quadratic_matrix(
    plant: &SwitchedPlant,
    gains: &GainSet,
    attack: &AttackParameters,
    p: usize,
    p_mat: &SymmetricMatrix,
) -> Result<Matrix, ClosedLoopError> {
    let rm = resync_matrices(plant, gains, attack, p)?;
    let terms = resync_step_terms(attack);
    Ok(step_matrix(&[&rm.at1, &rm.at2], &rm.at3, &terms, p_mat))
}

/// The assembled Theorem-1 system together with its variable handles.
pub struct Theorem1Assembly {
    pub problem: FeasibilityProblem,
    pub p_vars: Vec<VariableRef>,
    pub eps_var: VariableRef,
    /// Attack parameters after regime zeroing.
    pub attack: AttackParameters,
}

fn check_gains(
    plant: &SwitchedPlant,
    gains: &GainSet,
) -> Result<(), AnalysisError> {
    if gains.len() != plant.mode_count() {
        return Err(AnalysisError::Precondition(format!(
            "need one gain per mode, got {} for m = {}",
            gains.len(),
            plant.mode_count()
        )));
    }
    for (p, (mode, k)) in plant.modes().iter().zip(gains.gains()).enumerate() {
        if k.rows() != plant.input_dim() || k.cols() != plant.state_dim() {
            return Err(AnalysisError::Precondition(format!(
                "gain {} has shape {}x{}, expected {}x{}",
                p + 1,
                k.rows(),
                k.cols(),
                plant.input_dim(),
                plant.state_dim()
            )));
        }
        let rho = mode.a.add(&mode.b.matmul(k)).spectral_radius_estimate();
        if rho >= 1.0 {
            return Err(AnalysisError::Precondition(format!(
                "gain {} is not Schur-stabilizing: estimated spectral radius {rho:.4}",
                p + 1
            )));
        }
    }
    Ok(())
}

fn add_step_expression(
    builder: &mut ExprBuilder,
    mats: &[&Matrix],
    payload: &Matrix,
    terms: &StepTerms,
    p_var: &VariableRef,
    eps_var: &VariableRef,
    rho_s: f64,
    two_n: usize,
) {
    for &(c, l, r) in &terms.xx {
        builder.term(0, 0, &mats[l].transpose(), p_var, mats[r], c);
    }
    let ident = Matrix::identity(two_n);
    builder.term(0, 0, &ident, p_var, &ident, -(1.0 - rho_s));
    for &(c, l) in &terms.xa {
        builder.term(0, 1, &mats[l].transpose(), p_var, payload, c);
    }
    builder.term(1, 1, &payload.transpose(), p_var, payload, terms.aa);
    builder.scalar_identity(1, eps_var, -1.0);
}

/// Build the Theorem-1 feasibility system over `{P_p, ε}` for `regime`.
pub fn assemble_theorem1(
    plant: &SwitchedPlant,
    gains: &GainSet,
    attack: &AttackParameters,
    design: &DesignParameters,
    regime: Regime,
    delta: f64,
) -> Result<Theorem1Assembly, AnalysisError> {
    check_gains(plant, gains)?;
    let attack = regime.effective_attack(attack);
    let m = plant.mode_count();
    if regime == Regime::NonSwitched && m != 1 {
        return Err(AnalysisError::Precondition(format!(
            "non-switched regime requires m = 1, got {m}"
        )));
    }
    if matches!(regime, Regime::Full | Regime::DosOnly) {
        let c = design.c(&attack);
        if !(c < 1.0) {
            return Err(AnalysisError::Precondition(format!(
                "c = {c:.6} must stay below 1"
            )));
        }
    }
    let n = plant.state_dim();
    let two_n = 2 * n;

    let mut vars = Variables::new();
    let p_vars: Vec<VariableRef> =
        (0..m).map(|p| vars.symmetric(&format!("P_{}", p + 1), two_n)).collect();
    let eps_var = vars.scalar("eps");
    let mut problem = FeasibilityProblem::new(vars, delta);

    let with_async = matches!(regime, Regime::Full | Regime::DosOnly);
    let with_coupling = regime != Regime::NonSwitched && m > 1;

    for p in 0..m {
        let sm: SyncMatrices = sync_matrices(plant, gains, &attack, p)?;
        let terms = sync_step_terms(&attack);
        let mut pi = ExprBuilder::new(&[two_n, n]);
        add_step_expression(
            &mut pi,
            &[&sm.a1, &sm.a2, &sm.a3],
            &sm.a4,
            &terms,
            &p_vars[p],
            &eps_var,
            design.rho_s,
            two_n,
        );
        problem.add_nsd(format!("Pi_{}", p + 1), pi.build());

        if with_async {
            let rm: ResyncMatrices = resync_matrices(plant, gains, &attack, p)?;
            let rterms = resync_step_terms(&attack);
            let mut psi = ExprBuilder::new(&[two_n, n]);
            add_step_expression(
                &mut psi,
                &[&rm.at1, &rm.at2],
                &rm.at3,
                &rterms,
                &p_vars[p],
                &eps_var,
                design.rho_s,
                two_n,
            );
            problem.add_nsd(format!("Psi_{}", p + 1), psi.build());

            for q in 0..m {
                if q == p {
                    continue;
                }
                let abar = async_matrix(plant, gains, p, q)?;
                let ident = Matrix::identity(two_n);
                let mut omega = ExprBuilder::new(&[two_n]);
                omega.term(0, 0, &abar.transpose(), &p_vars[p], &abar, 1.0);
                omega.term(0, 0, &ident, &p_vars[p], &ident, -(1.0 + design.rho_u));
                problem.add_nsd(format!("Omega_{}_{}", p + 1, q + 1), omega.build());
            }
        }

        if with_coupling {
            let ident = Matrix::identity(two_n);
            for q in 0..m {
                if q == p {
                    continue;
                }
                let mut jump = ExprBuilder::new(&[two_n]);
                jump.term(0, 0, &ident, &p_vars[p], &ident, 1.0);
                jump.term(0, 0, &ident, &p_vars[q], &ident, -design.mu);
                problem.add_nsd(format!("jump_{}_{}", p + 1, q + 1), jump.build());
            }
        }
    }

    let ident = Matrix::identity(two_n);
    for p in 0..m {
        let mut pos = ExprBuilder::new(&[two_n]);
        pos.term(0, 0, &ident, &p_vars[p], &ident, 1.0);
        problem.add_psd(format!("P_{}_pos", p + 1), pos.build());
    }
    let one = Matrix::identity(1);
    let mut eps_pos = ExprBuilder::new(&[1]);
    eps_pos.term(0, 0, &one, &eps_var, &one, 1.0);
    problem.add_psd("eps_pos", eps_pos.build());

    Ok(Theorem1Assembly { problem, p_vars, eps_var, attack })
}

/// Options for [`analyze`].
#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    /// Strictness margin δ of every inequality.
    pub delta: f64,
    pub solve: SolveOptions,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { delta: 1e-6, solve: SolveOptions::default() }
    }
}

/// Solve the Theorem-1 system and return a verified certificate.
pub fn analyze(
    plant: &SwitchedPlant,
    gains: &GainSet,
    attack: &AttackParameters,
    design: &DesignParameters,
    regime: Regime,
    opts: &AnalyzeOptions,
) -> Result<AnalysisCertificate, AnalysisError> {
    let asm = assemble_theorem1(plant, gains, attack, design, regime, opts.delta)?;
    let assignment = solve_feasibility(&asm.problem, &opts.solve)?;
    certificate_from_assignment(&asm, &assignment, design, regime, opts.delta)
}

pub(crate) fn certificate_from_assignment(
    asm: &Theorem1Assembly,
    assignment: &Assignment,
    design: &DesignParameters,
    regime: Regime,
    delta: f64,
) -> Result<AnalysisCertificate, AnalysisError> {
    let report = verify(&asm.problem, assignment, 0.0)?;
    if !report.pass {
        return Err(AnalysisError::Inconclusive(
            "solver returned an assignment that fails verification".into(),
        ));
    }
    let p_mats = asm
        .p_vars
        .iter()
        .map(|v| {
            SymmetricMatrix::new(assignment.matrix(v).expect("P present").clone())
                .map_err(AnalysisError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let eps = assignment.scalar(&asm.eps_var).expect("eps present");
    Ok(AnalysisCertificate {
        regime,
        p_mats,
        eps,
        report,
        design: *design,
        attack: asm.attack,
        delta,
    })
}

/// Re-verify a certificate against a freshly assembled problem.
pub fn verify_certificate(
    plant: &SwitchedPlant,
    gains: &GainSet,
    cert: &AnalysisCertificate,
    tol: f64,
) -> Result<VerificationReport, AnalysisError> {
    let asm = assemble_theorem1(plant, gains, &cert.attack, &cert.design, cert.regime, cert.delta)?;
    let mut assignment = Assignment::new();
    for (v, p) in asm.p_vars.iter().zip(&cert.p_mats) {
        assignment.set_matrix(v, p.as_matrix().clone())?;
    }
    assignment.set_scalar(&asm.eps_var, cert.eps)?;
    Ok(verify(&asm.problem, &assignment, tol)?)
}

/// Evaluate the Π expression of one mode at a numeric `(P, ε)`; used by the
/// property tests to cross-check expression assembly against the closed
/// form.
pub fn evaluate_pi(
    asm: &Theorem1Assembly,
    p: usize,
    p_mat: &SymmetricMatrix,
    eps: f64,
) -> Result<Matrix, AnalysisError> {
    let name = format!("Pi_{}", p + 1);
    let c = asm
        .problem
        .constraints
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| AnalysisError::Precondition(format!("no constraint {name}")))?;
    let mut a = Assignment::new();
    a.set_matrix(&asm.p_vars[p], p_mat.as_matrix().clone())?;
    a.set_scalar(&asm.eps_var, eps)?;
    Ok(evaluate(&c.expr, &a)?.into_matrix())
}

/// Security level, asymptotic bound and envelope constants.
///
/// σ(0) is mode 1 by convention; `ell_worst_initial_mode` covers the other
/// choices. The envelope rate corresponds to scheduling at the integer dwell
/// `floor(τ_d*) + 1`.
pub fn security_metrics(
    cert: &AnalysisCertificate,
    x_tilde0: &[f64],
    gamma_bar: f64,
) -> SecurityReport {
    let design = &cert.design;
    let mu_bar = cert.regime.mu_bar(design, &cert.attack);
    let lambda_min_floor = cert.lambda_min_floor();
    let tau_d_star = dwell_from_mu_bar(mu_bar, design.rho_s);
    let g2_cap = 1.0 / design.rho_s;
    let psi = mu_bar * cert.eps * gamma_bar * gamma_bar / (design.rho_s * lambda_min_floor);

    let noise_term = cert.eps * gamma_bar * gamma_bar / (lambda_min_floor * design.rho_s);
    let v0 = |p: usize| cert.p_mats[p].quad_form(x_tilde0);
    let ell_for = |p: usize| mu_bar * (v0(p) / lambda_min_floor).max(noise_term);
    let ell = ell_for(0);
    let ell_worst = (0..cert.p_mats.len()).map(ell_for).fold(f64::NEG_INFINITY, f64::max);

    let lambda_max_p1 = extreme_eigenvalues(&cert.p_mats[0]).expect("finite certificate").1;
    let envelope_gain = 2.0 * mu_bar * lambda_max_p1 / lambda_min_floor;
    let tau_sched = tau_d_star.floor() + 1.0;
    let envelope_rate = design.rho_s_bar().powf(1.0 - tau_d_star / tau_sched);

    SecurityReport {
        tau_d_star,
        ell,
        ell_worst_initial_mode: ell_worst,
        psi,
        envelope_gain,
        envelope_rate,
        lambda_min_floor,
        g2_cap,
    }
}

/// Upper bound on `E‖x̃(k)‖²` under the round-robin schedule with integer
/// dwell `tau_d ≥ ceil(τ_d*)`:
///
/// `[ρ̄_s^e(k) · V(0) + μ̄ ε γ̄² / ρ_s] / min_p λ_min(P_p)` with
/// `e(k) = max(k - (s(k)+1)·τ_d*, 0)`, `s(k) = floor(k/τ_d)`. The exponent
/// uses the real-valued τ_d* (the identity μ̄ = ρ̄_s^{-τ_d*} turns the
/// per-interval jump factors into that form), so the bound decays to ψ
/// whenever `τ_d > τ_d*`.
pub fn envelope_bound(
    cert: &AnalysisCertificate,
    tau_d: usize,
    x_tilde0: &[f64],
    k: usize,
) -> Result<f64, AnalysisError> {
    let design = &cert.design;
    let mu_bar = cert.regime.mu_bar(design, &cert.attack);
    let tau_d_star = dwell_from_mu_bar(mu_bar, design.rho_s);
    if tau_d < 1 || (tau_d as f64) < tau_d_star.ceil() {
        return Err(AnalysisError::Precondition(format!(
            "tau_d = {tau_d} must be an integer at least ceil(tau_d_star) = {}",
            tau_d_star.ceil()
        )));
    }
    let lambda_min_floor = cert.lambda_min_floor();
    let v0 = cert.p_mats[0].quad_form(x_tilde0);
    let s_k = (k / tau_d) as f64;
    let exponent = (k as f64 - (s_k + 1.0) * tau_d_star).max(0.0);
    let gamma = cert.attack.gamma_bar;
    let noise = mu_bar * cert.eps * gamma * gamma / design.rho_s;
    Ok((design.rho_s_bar().powf(exponent) * v0 + noise) / lambda_min_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedloop::{expected_step_quadratic, Stage};
    use crate::model::PlantMode;
    use crate::numerics::vec_norm_sq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn example1_plant() -> SwitchedPlant {
        SwitchedPlant::new(vec![
            PlantMode {
                a: Matrix::from_rows(&[vec![0.88, 0.23], vec![0.84, -0.47]]),
                b: Matrix::from_rows(&[vec![-0.77, -0.33], vec![-0.31, 0.50]]),
            },
            PlantMode {
                a: Matrix::from_rows(&[vec![0.99, -0.08], vec![-0.39, -0.33]]),
                b: Matrix::from_rows(&[vec![0.47, 0.31], vec![0.60, -0.55]]),
            },
        ])
    }

    pub(crate) fn example1_gains() -> GainSet {
        GainSet::new(vec![
            Matrix::from_rows(&[vec![0.7848, 0.0864], vec![0.2825, 0.3376]]),
            Matrix::from_rows(&[vec![-1.6734, 1.9332], vec![0.0410, 0.1545]]),
        ])
    }

    fn example1_attack() -> AttackParameters {
        AttackParameters::new(0.13, 0.13, 0.13, AttackCoupling::Independent)
    }

    fn example1_design() -> DesignParameters {
        DesignParameters::new(0.15, 0.3, 1.1)
    }

    fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
        let raw = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut g = raw.matmul(&raw.transpose());
        for i in 0..n {
            g[(i, i)] += 0.2;
        }
        SymmetricMatrix::symmetrize(g).unwrap()
    }

    fn random_plant_and_gains(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (SwitchedPlant, GainSet) {
        let modes = (0..m)
            .map(|_| PlantMode {
                a: Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)),
                b: Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)),
            })
            .collect();
        let gains =
            (0..m).map(|_| Matrix::from_fn(n, n, |_, _| rng.gen_range(-0.8..0.8))).collect();
        (SwitchedPlant::new(modes), GainSet::new(gains))
    }

    /// Enumeration equals the closed-form quadratic on random instances,
    /// for both couplings and both stages.
    #[test]
    fn enumeration_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..100 {
            let (plant, gains) = random_plant_and_gains(&mut rng, 2, 2);
            let coupling = if trial % 2 == 0 {
                AttackCoupling::Independent
            } else {
                AttackCoupling::MutuallyExclusive
            };
            let (ab, bb) = match coupling {
                AttackCoupling::Independent => {
                    (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))
                }
                AttackCoupling::MutuallyExclusive => {
                    let a = rng.gen_range(0.0..1.0);
                    (a, rng.gen_range(0.0..(1.0 - a)))
                }
            };
            let attack = AttackParameters::new(ab, bb, 0.13, coupling);
            let p_mode = rng.gen_range(0..2);
            let p = random_psd(4, &mut rng);
            let x_tilde: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x_a: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xi: Vec<f64> = x_tilde.iter().chain(&x_a).copied().collect();

            let s_sync =
                sync_step_quadratic_matrix(&plant, &gains, &attack, p_mode, &p).unwrap();
            let closed: f64 = {
                let sv = s_sync.matvec(&xi);
                xi.iter().zip(&sv).map(|(a, b)| a * b).sum()
            };
            let enumerated = expected_step_quadratic(
                &p, Stage::Sync, &plant, &gains, &attack, p_mode, &x_tilde, &x_a,
            )
            .unwrap();
            let scale = 1.0 + enumerated.abs();
            assert!(
                (closed - enumerated).abs() < 1e-10 * scale,
                "sync stage mismatch: {closed} vs {enumerated} ({coupling:?})"
            );

            let s_resync =
                resync_step_quadratic_matrix(&plant, &gains, &attack, p_mode, &p).unwrap();
            let closed_r: f64 = {
                let sv = s_resync.matvec(&xi);
                xi.iter().zip(&sv).map(|(a, b)| a * b).sum()
            };
            let enumerated_r = expected_step_quadratic(
                &p, Stage::Resync, &plant, &gains, &attack, p_mode, &x_tilde, &x_a,
            )
            .unwrap();
            assert!(
                (closed_r - enumerated_r).abs() < 1e-10 * (1.0 + enumerated_r.abs()),
                "resync stage mismatch"
            );
        }
    }

    /// The LMI expression for Π must agree with the closed-form step matrix
    /// plus the `-(1-ρ_s)P` / `-εI` tail.
    #[test]
    fn pi_expression_matches_step_matrix() {
        let plant = example1_plant();
        let gains = example1_gains();
        let attack = example1_attack();
        let design = example1_design();
        let asm =
            assemble_theorem1(&plant, &gains, &attack, &design, Regime::Full, 1e-6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_psd(4, &mut rng);
        let eps = 0.7;
        for mode in 0..2 {
            let pi = evaluate_pi(&asm, mode, &p, eps).unwrap();
            let mut want = sync_step_quadratic_matrix(&plant, &gains, &attack, mode, &p).unwrap();
            let tail = p.as_matrix().scale(1.0 - design.rho_s);
            for i in 0..4 {
                for j in 0..4 {
                    want[(i, j)] -= tail[(i, j)];
                }
            }
            for i in 4..6 {
                want[(i, i)] -= eps;
            }
            assert!(pi.sub(&want).norm_max() < 1e-12);
        }
    }

    #[test]
    fn constraint_count_full_regime() {
        let asm = assemble_theorem1(
            &example1_plant(),
            &example1_gains(),
            &example1_attack(),
            &example1_design(),
            Regime::Full,
            1e-6,
        )
        .unwrap();
        // m·2 (Π, Ψ) + m(m-1) (Ω) + m(m-1) (jump) + positivity (2 P + ε)
        assert_eq!(asm.problem.constraints.len(), 2 + 2 + 2 + 2 + 3);
    }

    #[test]
    fn deception_only_drops_async_machinery() {
        let asm = assemble_theorem1(
            &example1_plant(),
            &example1_gains(),
            &example1_attack(),
            &example1_design(),
            Regime::DeceptionOnly,
            1e-6,
        )
        .unwrap();
        assert!(asm.problem.constraints.iter().all(|c| !c.name.starts_with("Omega")));
        assert!(asm.problem.constraints.iter().all(|c| !c.name.starts_with("Psi")));
        assert_eq!(asm.attack.beta_bar, 0.0);
        // Π + jump + positivity: 2 + 2 + 3
        assert_eq!(asm.problem.constraints.len(), 7);
    }

    #[test]
    fn non_switched_regime_shape() {
        let plant = SwitchedPlant::new(vec![example1_plant().mode(0).clone()]);
        let gains = GainSet::new(vec![example1_gains().gain(0).clone()]);
        let asm = assemble_theorem1(
            &plant,
            &gains,
            &example1_attack(),
            &example1_design(),
            Regime::NonSwitched,
            1e-6,
        )
        .unwrap();
        let names: Vec<&str> = asm.problem.constraints.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["Pi_1", "P_1_pos", "eps_pos"]);
        assert!(assemble_theorem1(
            &example1_plant(),
            &example1_gains(),
            &example1_attack(),
            &example1_design(),
            Regime::NonSwitched,
            1e-6
        )
        .is_err());
    }

    #[test]
    fn example1_with_printed_gains_is_feasible() {
        let cert = analyze(
            &example1_plant(),
            &example1_gains(),
            &example1_attack(),
            &example1_design(),
            Regime::Full,
            &AnalyzeOptions::default(),
        )
        .unwrap();
        assert!(cert.report.pass);
        assert!(cert.eps > 0.0);
        assert_eq!(cert.p_mats.len(), 2);
        assert!(cert.lambda_min_floor() >= cert.delta * 0.999);
        let reverified =
            verify_certificate(&example1_plant(), &example1_gains(), &cert, 1e-12).unwrap();
        assert!(reverified.pass);
    }

    #[test]
    fn unstabilized_plant_is_rejected() {
        let plant = SwitchedPlant::new(vec![PlantMode {
            a: Matrix::diag(&[2.0, 2.0]),
            b: Matrix::zeros(2, 2),
        }]);
        let gains = GainSet::new(vec![Matrix::zeros(2, 2)]);
        let err = analyze(
            &plant,
            &gains,
            &example1_attack(),
            &example1_design(),
            Regime::NonSwitched,
            &AnalyzeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, AnalysisError::Precondition(_)), "{err}");
    }

    #[test]
    fn attack_free_random_stable_plant_is_feasible() {
        // reduces to standard switched Lyapunov LMIs
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        let mut done = 0;
        while done < 3 {
            let (plant, gains) = random_plant_and_gains(&mut rng, 2, 2);
            let stable = plant.modes().iter().zip(gains.gains()).all(|(m, k)| {
                m.a.add(&m.b.matmul(k)).spectral_radius_estimate() < 0.85
            });
            if !stable {
                continue;
            }
            done += 1;
            let attack = AttackParameters::new(0.0, 0.0, 0.0, AttackCoupling::Independent);
            let cert = analyze(
                &plant,
                &gains,
                &attack,
                &example1_design(),
                Regime::Full,
                &AnalyzeOptions::default(),
            )
            .expect("attack-free analysis of stable closed loops must be feasible");
            assert!(cert.report.pass);
        }
    }

    #[test]
    fn dwell_time_formulas() {
        // aero-engine parameters: prints 7.9036
        let d = DesignParameters::new(0.1, 0.4, 1.1);
        let a = AttackParameters::new(0.13, 0.13, 0.13, AttackCoupling::Independent);
        let tau = min_dwell_time(&d, &a).unwrap();
        assert!((tau - 7.9036).abs() < 0.02, "tau = {tau}");

        // β̄ = 0 ⇒ c = 0, μ̄ = 2μ; μ = 1, ρ_s = 0.5 → -ln2/ln0.5 = 1
        let d = DesignParameters::new(0.5, 0.4, 1.0);
        let a = AttackParameters::new(0.0, 0.0, 0.0, AttackCoupling::Independent);
        assert!((min_dwell_time(&d, &a).unwrap() - 1.0).abs() < 1e-12);

        // two-mode example parameters evaluate to ≈ 5.111
        let d = DesignParameters::new(0.15, 0.3, 1.1);
        let a = AttackParameters::new(0.13, 0.13, 0.13, AttackCoupling::Independent);
        let tau = min_dwell_time(&d, &a).unwrap();
        assert!((tau - 5.1103).abs() < 5e-4, "tau = {tau}");

        // c ≥ 1 is a precondition failure
        let a = AttackParameters::new(0.13, 0.7, 0.13, AttackCoupling::Independent);
        assert!(min_dwell_time(&d, &a).is_err());
    }

    #[test]
    fn dwell_time_monotone_in_beta_and_mu() {
        let a0 = AttackParameters::new(0.13, 0.0, 0.13, AttackCoupling::Independent);
        let mut last = 0.0;
        for i in 0..20 {
            let mut a = a0;
            a.beta_bar = 0.02 * i as f64;
            let d = DesignParameters::new(0.15, 0.3, 1.1);
            let tau = min_dwell_time(&d, &a).unwrap();
            assert!(tau > last, "tau must increase with beta_bar");
            last = tau;
        }
        let mut last = 0.0;
        for i in 1..20 {
            let d = DesignParameters::new(0.15, 0.3, 1.0 + 0.05 * i as f64);
            let a = AttackParameters::new(0.13, 0.13, 0.13, AttackCoupling::Independent);
            let tau = min_dwell_time(&d, &a).unwrap();
            assert!(tau > last, "tau must increase with mu");
            last = tau;
        }
    }

    fn example1_certificate() -> AnalysisCertificate {
        analyze(
            &example1_plant(),
            &example1_gains(),
            &example1_attack(),
            &example1_design(),
            Regime::Full,
            &AnalyzeOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn security_metric_edge_cases() {
        let cert = example1_certificate();
        let x0 = [1.0, -1.0, 1.0, -1.0];

        // γ̄ = 0: ψ = 0 and ℓ is the initial-state term
        let r = security_metrics(&cert, &x0, 0.0);
        assert_eq!(r.psi, 0.0);
        let mu_bar = cert.regime.mu_bar(&cert.design, &cert.attack);
        let expect = mu_bar * cert.p_mats[0].quad_form(&x0) / r.lambda_min_floor;
        assert!((r.ell - expect).abs() < 1e-12 * expect);

        // x̃₀ = 0: ℓ = ψ
        let r = security_metrics(&cert, &[0.0; 4], 0.13);
        assert!((r.ell - r.psi).abs() < 1e-12 * r.psi);

        // doubling γ̄ quadruples ψ exactly
        let r1 = security_metrics(&cert, &x0, 0.1);
        let r2 = security_metrics(&cert, &x0, 0.2);
        assert!((r2.psi - 4.0 * r1.psi).abs() < 1e-12 * r2.psi);

        // ℓ = max(μ̄ V0 / λmin, ψ)
        let r = security_metrics(&cert, &x0, 0.13);
        let v0_term = mu_bar * cert.p_mats[0].quad_form(&x0) / r.lambda_min_floor;
        assert!((r.ell - v0_term.max(r.psi)).abs() < 1e-12 * r.ell);
        assert!(r.envelope_rate >= 0.0 && r.envelope_rate < 1.0);
        assert!((r.g2_cap - 1.0 / 0.15).abs() < 1e-12);
    }

    #[test]
    fn envelope_edges_and_recursive_oracle() {
        let cert = example1_certificate();
        let x0 = [1.0, -1.0, 1.0, -1.0];
        let metrics = security_metrics(&cert, &x0, cert.attack.gamma_bar);
        let tau = metrics.tau_d_star.ceil() as usize;

        // k = 0 dominates ‖x̃₀‖²
        let e0 = envelope_bound(&cert, tau, &x0, 0).unwrap();
        assert!(e0 >= vec_norm_sq(&x0));

        // k → ∞ tends to ψ
        let big = envelope_bound(&cert, tau, &x0, 100_000).unwrap();
        assert!((big - metrics.psi).abs() < 1e-9 * metrics.psi.max(1.0));

        // recursive-inequality oracle: accumulate the per-interval jump and
        // decay factors step by step and cap the transient coefficient at 1
        let mu_bar = cert.regime.mu_bar(&cert.design, &cert.attack);
        let rho_bar = cert.design.rho_s_bar();
        let oracle = |k: usize, tau_d: usize| -> f64 {
            let mut coeff = mu_bar; // jump allowance of the running interval
            for j in 1..=k {
                coeff *= rho_bar;
                if j % tau_d == 0 {
                    coeff *= mu_bar;
                }
            }
            // the last interval's jump is counted even at its first step
            let v0 = cert.p_mats[0].quad_form(&x0);
            let gamma = cert.attack.gamma_bar;
            let noise = mu_bar * cert.eps * gamma * gamma / cert.design.rho_s;
            (coeff.min(1.0) * v0 + noise) / cert.lambda_min_floor()
        };
        // τ_d = 9 > ceil(τ_d*) = 6 exercises the generic schedule
        for k in [0usize, 7, 23, 50] {
            let got = envelope_bound(&cert, 9, &x0, k).unwrap();
            let want = oracle(k, 9);
            assert!(
                (got - want).abs() <= 1e-9 * want.max(1.0) + 1e-12,
                "k = {k}: {got} vs oracle {want}"
            );
        }

        assert!(envelope_bound(&cert, tau - 1, &x0, 5).is_err());
    }

    /// One-step decrease: for random ξ with ‖x_a‖² ≤ γ̄², the synchronous
    /// expectation obeys E ≤ (1-ρ_s)x̃ᵀP_px̃ + εγ̄².
    #[test]
    fn certificate_guarantees_one_step_decrease() {
        let cert = example1_certificate();
        let plant = example1_plant();
        let gains = example1_gains();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let gamma = cert.attack.gamma_bar;
        for _ in 0..500 {
            let p_mode = rng.gen_range(0..2);
            let x_tilde: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut x_a: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = vec_norm_sq(&x_a).sqrt();
            let r = rng.gen_range(0.0..1.0f64) * gamma;
            for v in &mut x_a {
                *v *= r / norm.max(1e-12);
            }
            for stage in [Stage::Sync, Stage::Resync] {
                let e = expected_step_quadratic(
                    &cert.p_mats[p_mode],
                    stage,
                    &plant,
                    &gains,
                    &cert.attack,
                    p_mode,
                    &x_tilde,
                    &x_a,
                )
                .unwrap();
                let bound = (1.0 - cert.design.rho_s) * cert.p_mats[p_mode].quad_form(&x_tilde)
                    + cert.eps * gamma * gamma;
                assert!(e <= bound + 1e-9, "{stage:?}: {e} > {bound}");
            }
        }
    }

    /// Async growth and mode-jump bounds as eigenvalue checks.
    #[test]
    fn certificate_eigenvalue_side_conditions() {
        let cert = example1_certificate();
        let plant = example1_plant();
        let gains = example1_gains();
        for p in 0..2 {
            for q in 0..2 {
                if p == q {
                    continue;
                }
                let abar = async_matrix(&plant, &gains, p, q).unwrap();
                let grow = abar
                    .transpose()
                    .matmul(cert.p_mats[p].as_matrix())
                    .matmul(&abar)
                    .sub(&cert.p_mats[p].as_matrix().scale(1.0 + cert.design.rho_u));
                let (_, hi) = extreme_eigenvalues(&SymmetricMatrix::symmetrize(grow).unwrap()).unwrap();
                assert!(hi <= 1e-8, "async growth bound violated: {hi}");

                let jump = cert.p_mats[p]
                    .as_matrix()
                    .sub(&cert.p_mats[q].as_matrix().scale(cert.design.mu));
                let (_, hi) = extreme_eigenvalues(&SymmetricMatrix::symmetrize(jump).unwrap()).unwrap();
                assert!(hi <= 1e-8, "mode-jump bound violated: {hi}");
            }
        }
    }
}
