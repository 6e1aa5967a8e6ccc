//! Numerical construction and verification of super-critical Bloch
//! eigenstates of the gauged Schrödinger operator
//! `L_{h,P} ψ = −(h d/dx + iP)² ψ + V ψ` on the circle `[0, 1)`.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! - [`potential`]: trigonometric-series potentials and their extrema
//! - [`quadrature`]: the action integrals I(E) and J(E)
//! - [`dispersion`]: the super-critical branch E₀(P), λ, Ω̄ and the h-grid
//! - [`amplitude`]: the nonlinear amplitude ODE, its period map and fixed points
//! - [`bloch`]: phase reconstruction, normalization and eigen-residuals
//! - [`oracle`]: dense Fourier diagonalization as an independent check
//! - [`harness`]: sweeps, persistence and golden regression

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod amplitude;
pub mod bloch;
pub mod dispersion;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod potential;
pub mod quadrature;
pub mod stats;

pub use error::{BlochError, Result};

/// Relative tolerance used for every action integral downstream.
pub const DEFAULT_REL_TOL: f64 = 1e-11;

/// Coarse grid for extremum location.
pub const ANALYSIS_GRID: usize = 4096;
