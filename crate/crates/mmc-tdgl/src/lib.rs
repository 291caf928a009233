//! Phase-field solver for the MMC-TDGL equation — a stochastic Cahn-Hilliard
//! gradient flow with the reticular free energy — on 2D periodic domains.
//!
//! The discretization is an unconditionally energy-stable convex-splitting
//! finite difference scheme: the convex part of the energy is treated
//! implicitly, the expansive part explicitly, and the resulting nonlinear
//! system is solved each step by matrix-free Newton-GMRES. Deterministic
//! runs decrease the discrete energy for any step size and conserve the mean
//! concentration exactly up to solver tolerance; stochastic runs add a
//! discrete conservative noise that keeps the mean intact.
//!
//! Crate layout:
//!
//! - [`params`]: model constants and the derived reticular parameters.
//! - [`grid`]: periodic cell/edge fields, staggered operators, inner products.
//! - [`energy`]: the reticular energy, its convex splitting, variational
//!   derivatives, and the Hessian action.
//! - [`noise`]: seeded generation of the conservative noise field.
//! - [`solver`]: one-step Newton-GMRES solve of the scheme.
//! - [`stepper`]: time loop, adaptive step controller, ensemble driver.
//! - [`config`], [`output`], [`runner`]: batch front-end — run configuration
//!   files, CSV/graymap/manifest writers, and the subcommand drivers.
//!
//! The `examples/` directory has one runnable example per major capability;
//! the `mmc-tdgl` binary exposes the same drivers as subcommands.

// Validation deliberately writes `!(x > 0.0)` so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod error;
pub mod grid;
pub mod noise;
pub mod output;
pub mod params;
pub mod runner;
pub mod selftest;
pub mod solver;
pub mod stepper;

pub use energy::{discrete_energy, EnergyReport};
pub use error::{Error, Result};
pub use grid::{CellField, EdgeFieldEW, EdgeFieldNS};
pub use params::{GridGeometry, ModelParams};
pub use solver::{newton_solve, NewtonSettings, StepSolveReport};
pub use stepper::{AdaptivePolicy, Simulation, StepMode, Trajectory};
