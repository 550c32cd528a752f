//! Configuration types: plants, attacks, design parameters, scenarios.
//!
//! Validation is findings-based: [`validate`] returns a list of violated
//! rules instead of failing on the first one, so a scenario file can be
//! diagnosed in one pass.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;

/// Per-mode state and input matrices of a switched linear plant
/// `x(k+1) = A_σ x(k) + B_σ u(k)`.
#[derive(Debug, Clone)]
pub struct SwitchedPlant {
    modes: Vec<PlantMode>,
}

#[derive(Debug, Clone)]
pub struct PlantMode {
    pub a: Matrix,
    pub b: Matrix,
}

impl SwitchedPlant {
    pub fn new(modes: Vec<PlantMode>) -> Self {
        assert!(!modes.is_empty(), "a switched plant needs at least one mode");
        Self { modes }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, p: usize) -> &PlantMode {
        &self.modes[p]
    }

    pub fn modes(&self) -> &[PlantMode] {
        &self.modes
    }

    pub fn state_dim(&self) -> usize {
        self.modes[0].a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.modes[0].b.cols()
    }
}

/// How the two Bernoulli attack processes interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackCoupling {
    /// α(k) and β(k) are independent; both may fire at once (the DoS then
    /// dominates and the deception payload is dropped).
    Independent,
    /// α(k)·β(k) ≡ 0: at most one attack per step, with outcome
    /// probabilities (1-ᾱ-β̄, ᾱ, β̄).
    MutuallyExclusive,
}

/// Bernoulli attack probabilities and the deception energy bound.
///
/// The payload bound is read as `‖x_a(k)‖₂² ≤ γ̄²`, which is the form the
/// stability arguments actually use.
#[derive(Debug, Clone, Copy)]
pub struct AttackParameters {
    pub alpha_bar: f64,
    pub beta_bar: f64,
    pub gamma_bar: f64,
    pub coupling: AttackCoupling,
}

impl AttackParameters {
    pub fn new(alpha_bar: f64, beta_bar: f64, gamma_bar: f64, coupling: AttackCoupling) -> Self {
        Self { alpha_bar, beta_bar, gamma_bar, coupling }
    }

    /// α̃ = ᾱ(1-ᾱ), the variance of the deception Bernoulli process.
    pub fn alpha_tilde(&self) -> f64 {
        self.alpha_bar * (1.0 - self.alpha_bar)
    }

    /// β̃ = β̄(1-β̄), the variance of the DoS Bernoulli process.
    pub fn beta_tilde(&self) -> f64 {
        self.beta_bar * (1.0 - self.beta_bar)
    }

    /// χ₃ = (1-ᾱ)(1-β̄).
    pub fn chi3(&self) -> f64 {
        (1.0 - self.alpha_bar) * (1.0 - self.beta_bar)
    }

    /// Probability that the true state is delivered this step.
    pub fn deliver_probability(&self) -> f64 {
        match self.coupling {
            AttackCoupling::Independent => self.chi3(),
            AttackCoupling::MutuallyExclusive => 1.0 - self.alpha_bar - self.beta_bar,
        }
    }

    /// Probability that a deception payload reaches the controller.
    pub fn spoof_probability(&self) -> f64 {
        match self.coupling {
            AttackCoupling::Independent => self.alpha_bar * (1.0 - self.beta_bar),
            AttackCoupling::MutuallyExclusive => self.alpha_bar,
        }
    }

    /// Probability that the channel is jammed (controller holds).
    pub fn jam_probability(&self) -> f64 {
        self.beta_bar
    }
}

/// Scalars of the time-dependent switching analysis.
#[derive(Debug, Clone, Copy)]
pub struct DesignParameters {
    /// Synchronous decrease rate, ρ_s ∈ (0,1).
    pub rho_s: f64,
    /// Asynchronous growth allowance, ρ_u > 0.
    pub rho_u: f64,
    /// Mode-jump energy factor, μ > 1.
    pub mu: f64,
}

impl DesignParameters {
    pub fn new(rho_s: f64, rho_u: f64, mu: f64) -> Self {
        Self { rho_s, rho_u, mu }
    }

    pub fn rho_s_bar(&self) -> f64 {
        1.0 - self.rho_s
    }

    pub fn rho_u_bar(&self) -> f64 {
        1.0 + self.rho_u
    }

    /// c = β̄(1+ρ_u)/(1-ρ_s); the analysis requires c < 1.
    pub fn c(&self, attack: &AttackParameters) -> f64 {
        attack.beta_bar * self.rho_u_bar() / self.rho_s_bar()
    }

    /// μ̄ = μ(2-β̄-c)/(1-c), the worst-case energy factor across one
    /// switching interval including the asynchronous recovery.
    pub fn mu_bar(&self, attack: &AttackParameters) -> f64 {
        let c = self.c(attack);
        self.mu * (2.0 - attack.beta_bar - c) / (1.0 - c)
    }
}

/// Scalars of the mixed-switching design.
#[derive(Debug, Clone, Copy)]
pub struct MixedParameters {
    pub rho_s: f64,
    pub lambda: f64,
    pub mu: f64,
    pub mu1: f64,
    pub mu2: f64,
}

/// One state-feedback gain per mode.
#[derive(Debug, Clone)]
pub struct GainSet {
    gains: Vec<Matrix>,
}

impl GainSet {
    pub fn new(gains: Vec<Matrix>) -> Self {
        Self { gains }
    }

    pub fn gain(&self, p: usize) -> &Matrix {
        &self.gains[p]
    }

    pub fn gains(&self) -> &[Matrix] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// Which deception payload the simulator draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadPolicy {
    /// `‖x_a‖₂ = γ̄`, uniform direction (worst admissible magnitude).
    Sphere,
    /// Uniform in the closed γ̄-ball.
    Ball,
    /// Fixed unit direction (first axis) scaled by γ̄.
    Constant,
}

impl Default for PayloadPolicy {
    fn default() -> Self {
        PayloadPolicy::Sphere
    }
}

/// A complete experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: SwitchedPlant,
    pub attack: AttackParameters,
    pub design: Option<DesignParameters>,
    pub mixed: Option<MixedParameters>,
    pub gains: Option<GainSet>,
    /// Initial plant state x(0). The channel memory starts synchronized:
    /// x̄(-1) = x(0), so x̃(0) = [x(0); x(0)].
    pub x0: Vec<f64>,
    pub horizon: usize,
    pub seed: u64,
    pub runs: usize,
    pub payload: PayloadPolicy,
}

/// One violated rule, naming the field it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Check every type invariant and cross-object dimension of a scenario.
/// Returns an empty list iff the scenario is usable.
pub fn validate(s: &Scenario) -> Vec<Finding> {
    let mut f = Vec::new();
    let n_x = s.plant.state_dim();
    let n_u = s.plant.input_dim();

    for (i, m) in s.plant.modes().iter().enumerate() {
        let label = |part: &str| format!("plant.mode.{}.{}", i + 1, part);
        if !m.a.is_square() {
            f.push(Finding { field: label("A"), rule: "A must be square".into() });
        }
        if m.a.rows() != n_x {
            f.push(Finding {
                field: label("A"),
                rule: format!("all modes must share the state dimension {n_x}"),
            });
        }
        if m.b.rows() != n_x || m.b.cols() != n_u {
            f.push(Finding {
                field: label("B"),
                rule: format!("B must be {n_x}x{n_u} in every mode"),
            });
        }
        if !m.a.is_finite() || !m.b.is_finite() {
            f.push(Finding { field: label("A/B"), rule: "entries must be finite".into() });
        }
    }

    let a = &s.attack;
    if !(0.0..=1.0).contains(&a.alpha_bar) {
        f.push(Finding { field: "attack.alpha_bar".into(), rule: "must lie in [0,1]".into() });
    }
    if !(0.0..=1.0).contains(&a.beta_bar) {
        f.push(Finding { field: "attack.beta_bar".into(), rule: "must lie in [0,1]".into() });
    }
    if !(a.gamma_bar >= 0.0) {
        f.push(Finding { field: "attack.gamma_bar".into(), rule: "must be nonnegative".into() });
    }
    if a.coupling == AttackCoupling::MutuallyExclusive && a.alpha_bar + a.beta_bar > 1.0 {
        f.push(Finding {
            field: "attack.coupling".into(),
            rule: "mutually-exclusive attacks require alpha_bar + beta_bar <= 1".into(),
        });
    }

    if let Some(d) = &s.design {
        if !(d.rho_s > 0.0 && d.rho_s < 1.0) {
            f.push(Finding { field: "design.rho_s".into(), rule: "must lie in (0,1)".into() });
        }
        if !(d.rho_u > 0.0) {
            f.push(Finding { field: "design.rho_u".into(), rule: "must be positive".into() });
        }
        if !(d.mu > 1.0) {
            f.push(Finding { field: "design.mu".into(), rule: "must exceed 1".into() });
        }
        if d.rho_s > 0.0 && d.rho_s < 1.0 {
            let c = d.c(a);
            if !(c < 1.0) {
                f.push(Finding {
                    field: "design".into(),
                    rule: format!(
                        "c = beta_bar(1+rho_u)/(1-rho_s) = {c:.4} must stay below 1 for the dwell-time analysis"
                    ),
                });
            }
        }
    }

    if let Some(m) = &s.mixed {
        if !(m.rho_s > 0.0 && m.rho_s < 1.0) {
            f.push(Finding { field: "mixed.rho_s".into(), rule: "must lie in (0,1)".into() });
        }
        if !(m.lambda > 0.0) {
            f.push(Finding { field: "mixed.lambda".into(), rule: "must be positive".into() });
        }
        for (name, v) in [("mu", m.mu), ("mu1", m.mu1), ("mu2", m.mu2)] {
            if !(v >= 1.0) {
                f.push(Finding {
                    field: format!("mixed.{name}"),
                    rule: "must be at least 1".into(),
                });
            }
        }
    }

    if let Some(g) = &s.gains {
        if g.len() != s.plant.mode_count() {
            f.push(Finding {
                field: "gains".into(),
                rule: format!("need one gain per mode ({})", s.plant.mode_count()),
            });
        }
        for (i, k) in g.gains().iter().enumerate() {
            if k.rows() != n_u || k.cols() != n_x {
                f.push(Finding {
                    field: format!("gains.{}", i + 1),
                    rule: format!("K must be {n_u}x{n_x}, got {}x{}", k.rows(), k.cols()),
                });
            }
        }
        // Schur screening of each closed-loop mode (analysis hypothesis)
        if g.len() == s.plant.mode_count() {
            for (i, (m, k)) in s.plant.modes().iter().zip(g.gains()).enumerate() {
                if k.rows() == n_u && k.cols() == n_x {
                    let cl = m.a.add(&m.b.matmul(k));
                    let rho = cl.spectral_radius_estimate();
                    if rho >= 1.0 {
                        f.push(Finding {
                            field: format!("gains.{}", i + 1),
                            rule: format!(
                                "A+BK must be Schur stable; estimated spectral radius {rho:.4}"
                            ),
                        });
                    }
                }
            }
        }
    }

    if s.x0.len() != n_x {
        f.push(Finding {
            field: "simulation.x0".into(),
            rule: format!("x(0) must have length {n_x}"),
        });
    }
    if s.horizon < 1 {
        f.push(Finding { field: "simulation.horizon".into(), rule: "must be at least 1".into() });
    }
    if s.runs < 1 {
        f.push(Finding { field: "simulation.runs".into(), rule: "must be at least 1".into() });
    }

    f
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn base_scenario() -> Scenario {
        Scenario {
            plant: example1_plant(),
            attack: AttackParameters::new(0.13, 0.13, 0.13, AttackCoupling::Independent),
            design: Some(DesignParameters::new(0.15, 0.3, 1.1)),
            mixed: None,
            gains: None,
            x0: vec![1.0, -1.0],
            horizon: 100,
            seed: 1,
            runs: 100,
            payload: PayloadPolicy::Sphere,
        }
    }

    #[test]
    fn example_scenario_is_clean() {
        assert!(validate(&base_scenario()).is_empty());
    }

    #[test]
    fn c_at_least_one_is_flagged() {
        let mut s = base_scenario();
        s.attack.beta_bar = 0.7;
        // c = 0.7 * 1.3 / 0.85 ≈ 1.071
        let findings = validate(&s);
        assert!(findings.iter().any(|f| f.rule.contains("1.071") || f.rule.contains("c =")));
        let c = s.design.unwrap().c(&s.attack);
        assert!((c - 1.0705882).abs() < 1e-6);
    }

    #[test]
    fn wrong_gain_shape_is_flagged() {
        let mut s = base_scenario();
        s.gains = Some(GainSet::new(vec![Matrix::zeros(2, 3), Matrix::zeros(2, 2)]));
        let findings = validate(&s);
        assert!(findings.iter().any(|f| f.field == "gains.1" && f.rule.contains("2x2")));
    }

    #[test]
    fn unstable_gains_are_flagged() {
        let mut s = base_scenario();
        // zero gains leave A_1 with spectral radius > 1
        s.gains = Some(GainSet::new(vec![Matrix::zeros(2, 2), Matrix::zeros(2, 2)]));
        let findings = validate(&s);
        assert!(findings.iter().any(|f| f.rule.contains("Schur")));
    }

    #[test]
    fn derived_scalars_recompute_exactly() {
        let a = AttackParameters::new(0.13, 0.13, 0.13, AttackCoupling::Independent);
        assert_eq!(a.alpha_tilde(), 0.13 * 0.87);
        assert_eq!(a.beta_tilde(), 0.13 * 0.87);
        let d = DesignParameters::new(0.15, 0.3, 1.1);
        assert_eq!(d.rho_s_bar(), 0.85);
        assert_eq!(d.rho_u_bar(), 1.3);
        let c = d.c(&a);
        assert_eq!(c, 0.13 * 1.3 / 0.85);
        let mu_bar = d.mu_bar(&a);
        assert_eq!(mu_bar, 1.1 * (2.0 - 0.13 - c) / (1.0 - c));
    }

    #[test]
    fn coupled_attack_probabilities() {
        let a = AttackParameters::new(0.2, 0.3, 0.1, AttackCoupling::MutuallyExclusive);
        assert_eq!(a.deliver_probability(), 0.5);
        assert_eq!(a.spoof_probability(), 0.2);
        assert_eq!(a.jam_probability(), 0.3);
        let ind = AttackParameters::new(0.2, 0.3, 0.1, AttackCoupling::Independent);
        assert!((ind.deliver_probability() - 0.8 * 0.7).abs() < 1e-15);
        assert!((ind.spoof_probability() - 0.2 * 0.7).abs() < 1e-15);
    }
}
