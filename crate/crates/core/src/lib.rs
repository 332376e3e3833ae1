//! Vortex-ring leapfrogging: loop potentials, the ring interaction
//! Hamiltonian, the reduced ODE systems and an axisymmetric
//! Gross–Pitaevskii solver.
//!
//! The analytic layers are generic over [`Real`] (`f32` or `f64`); the grid
//! layers work in `f64`. Aliases for the common `f64` instantiations live at
//! the crate root.

pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod gp;
pub mod hamiltonian;
pub mod ode;
pub mod portrait;
pub mod potential;
pub mod quadrature;
pub mod real;

pub use error::{Error, Result};
pub use real::Real;

pub type EllipticPairF64 = elliptic::EllipticPair<f64>;
pub type RingPointF64 = potential::RingPoint<f64>;
pub type RingConfigF64 = potential::RingConfig<f64>;
pub type HamiltonianParamsF64 = hamiltonian::HamiltonianParams<f64>;
pub type ReducedConfigF64 = hamiltonian::ReducedConfig<f64>;
