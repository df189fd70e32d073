//! Small-signal deformation analysis of fixed-step integration methods on
//! differential-algebraic models.
//!
//! A semi-explicit DAE x' = f(x, y), 0 = g(x, y) linearized at an equilibrium
//! has a reduced state matrix A whose eigenvalues and participation factors
//! describe the continuous dynamics. Applying a one-step integration method
//! with step h to the linearized system produces a discrete one-step map
//! (the companion matrix G) with its own spectrum and participation factors.
//! This crate measures how far G's modes drift from A's:
//!
//! * `eps_s` — relative eigenvalue deformation between s and log(z)/h,
//! * `eps_p` — relative participation-magnitude deformation per (state, mode),
//!
//! and selects the largest step size on a grid for which both stay within
//! user thresholds. A fixed-step nonlinear simulator for the same methods
//! doubles as an independent oracle: on linear models its trajectories must
//! match powers of G exactly (to solver tolerance).
//!
//! Modules:
//! * [`dae`] — model container, Jacobians, equilibrium search, builtins.
//! * [`linear_model`] — JSON import/export of linearized models.
//! * [`eigen`] — dense real eigendecomposition with left/right vectors.
//! * [`sssa`] — reduction to A, stiffness, damping, participation factors.
//! * [`tdi`] — integration-method taxonomy and companion matrices.
//! * [`assignment`] — minimum-cost mode pairing.
//! * [`deformation`] — the deformation metrics, sweeps, and step selection.
//! * [`simulator`] — fixed-step nonlinear integration.
//! * [`report`] — deterministic CSV/JSON rendering.

pub mod assignment;
pub mod dae;
pub mod deformation;
pub mod eigen;
pub mod error;
pub mod linear_model;
pub mod report;
pub mod simulator;
pub mod sssa;
pub mod tdi;

pub use error::{Error, Result};
