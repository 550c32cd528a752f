//! Resilient control toolkit for discrete-time switched linear systems whose
//! sensor-to-controller channel suffers Bernoulli DoS and deception attacks.
//!
//! The library covers the full desk-scale workflow:
//!
//! * [`numerics`] — dense small-matrix kernel (block assembly, Jacobi
//!   eigenvalues, null-space bases, zero-order-hold discretization);
//! * [`lmi`] — affine LMI systems with structured variables, a feasibility
//!   solver and an independent certificate verifier;
//! * [`model`] — plants, attack and design parameters, scenarios, validation;
//! * [`closedloop`] — augmented closed-loop matrices per channel stage and an
//!   exact enumeration oracle for one-step expected quadratic forms;
//! * [`analysis`] — mean-square practical-stability certificates, minimum
//!   dwell time, security level and asymptotic bound;
//! * [`synthesis`] — controller-gain synthesis and mixed-switching design;
//! * [`sim`] — seeded stochastic simulation and Monte Carlo aggregation;
//! * [`scenario`], [`report`], [`sweep`], [`cli`] — file formats and the
//!   command-line surface.
//!
//! See the crate `examples/` directory for one runnable example per major
//! capability.

pub mod analysis;
// pub mod cli;
pub mod closedloop;
pub mod lmi;
pub mod model;
pub mod numerics;
// pub mod report;
// pub mod scenario;
// pub mod sim;
// pub mod sweep;
// pub mod synthesis;
