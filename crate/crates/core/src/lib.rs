//! Decomposition and adiabatic-transfer tools for multilevel STIRAP systems.
//!
//! Systems are described by two lowering operators coupling ground manifolds
//! `a` and `b` to a shared excited manifold `e`. The crate finds the
//! dark/bright structure of the pair, builds the λ-pairs that carry population
//! through the sweep, integrates the adiabatic map and checks it against a
//! direct Schrödinger propagation.

pub mod atom;
pub mod decomp;
pub mod error;
pub mod linalg;
pub mod ode;
pub mod oracle;
pub mod passage;

pub use atom::{cesium_system, toy_model, HalfInt, LevelSystem, Manifold, Polarization, TransitionSpec};
pub use decomp::{adapted_a_basis, decompose, lambda_pairs, verify_bright, Decomposition, DimRow, LambdaBasis};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, SubspaceBasis, DEFAULT_RANK_TOL};
pub use ode::OdeOptions;
pub use oracle::{convergence_study, evolve, hamiltonian, ProfileShape, StepControl, SweepProfile, SweepResult};
pub use passage::{
    analytic_two_level, integrate_transfer, trajectory, Direction, Predictor, TransferMap, TwoLevelSolution,
};
