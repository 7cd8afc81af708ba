//! Spectral Galerkin discretisation of the deterministic reaction-diffusion
//! equation on (0,1) with Dirichlet boundary conditions.

pub mod domain;
pub mod fixed_points;
pub mod flow;
pub mod galerkin;
pub mod nonlinearity;
pub mod vector;

pub use domain::{BasinClassifier, BasinVerdict, Domain, DomainShape, JumpCheck, ReducedDomain, ReductionLevel};
pub use fixed_points::{find_fixed_points, newton_refine, FixedPoint, Stability};
pub use flow::{
    estimate_kappa0, evolve_deterministic, evolve_with_cap, probe_directions, relaxation_time,
    Kappa0Estimate, LevelSet,
};
pub use galerkin::{Galerkin, Workspace, DEFAULT_BLOW_UP_CAP};
pub use nonlinearity::Nonlinearity;
pub use vector::{eigenvalue, HilbertVector, SEMIGROUP_DECAY, SOBOLEV_EMBEDDING};
