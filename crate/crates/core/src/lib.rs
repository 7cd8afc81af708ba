//! Simulation laboratory for reaction-diffusion equations on (0,1) with
//! Dirichlet boundary conditions, perturbed by small multiplicative Lévy
//! noise with regularly varying (heavy) tails.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: sine-mode Galerkin representation of H¹₀(0,1), the
//!   deterministic flow, its equilibria, potential, basins and reduced domains.
//! * [`levy`]: Lévy measures with finitely many angular atoms, tail calculus
//!   and samplers for the large-jump and small-jump components.
//! * [`coefficient`]: the noise coefficient `G(x, z)` presets.
//! * [`solver`]: jump-adapted exponential-Euler integrator and first-exit trials.
//! * [`theory`]: exit rates, limit measures, scale exponents, generator matrix.
//! * [`models`]: the exactly exponential / geometric exit models built from
//!   the same large-jump stream as the solver.
//! * [`experiments`]: campaign configuration, statistics and persistence.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficient;
pub mod error;
pub mod experiments;
pub mod levy;
pub mod models;
pub mod solver;
pub mod spectral;
pub mod theory;

pub use coefficient::Coefficient;
pub use error::{Error, Result};
pub use levy::{Atom, JumpEvent, LevyMeasure, SlowVariation};
pub use spectral::{
    Domain, FixedPoint, Galerkin, HilbertVector, Nonlinearity, ReducedDomain, ReductionLevel,
    Stability,
};
pub use theory::{GeneratorMatrix, ScaleParams};
