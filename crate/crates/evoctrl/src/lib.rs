//! Constrained linear-quadratic optimal control of semidiscretized
//! evolution equations.
//!
//! The library is organized bottom-up:
//!
//! - [`linops`]: matrices, SPD solves, descriptor systems and their
//!   weighted adjoints
//! - [`timegrid`]: trajectory containers, time reflection, discrete L²
//! - [`integrators`]: forward schemes and their exactly-transposed
//!   adjoints (discretize-then-optimize)
//! - [`solution_maps`]: input-to-state / terminal / input- and
//!   output-maps plus the adjoint-identity certificate
//! - [`ocp`]: cost, exact gradients, CG / projected-gradient /
//!   augmented-Lagrangian solvers, optimality certificates
//! - [`ph`]: port-Hamiltonian nodes, dissipation factorization, energy
//!   accounting, energy-optimal reformulation
//! - [`fem1d`]: 1D advection-diffusion-reaction with Dirichlet boundary
//!   control and Neumann observation
//! - [`fem2d`]: mixed P1 wave system on the L-shaped domain with
//!   boundary velocity control
//! - [`experiments`]: the two reference experiment setups, config
//!   parsing, artifact emission
//! - [`svg`]: minimal plot writer for experiment artifacts

pub mod linops;
pub mod timegrid;
pub mod integrators;
pub mod solution_maps;
pub mod ocp;
pub mod ph;
pub mod fem1d;
pub mod fem2d;
pub mod experiments;
pub mod svg;
