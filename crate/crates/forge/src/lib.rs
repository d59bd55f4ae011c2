//! Distill hierarchical orthonormal spatial bases from trained operator
//! networks and use them in spectral Galerkin solvers for periodic 1-D PDEs.
//!
//! The pipeline, end to end:
//!
//! 1. [`random_fields`] draws periodic Gaussian-random-field initial
//!    conditions.
//! 2. [`reference`] generates ground-truth trajectories with a Fourier
//!    pseudospectral solver (advection, advection-diffusion, viscous Burgers)
//!    or a MUSCL finite-volume scheme (inviscid Burgers).
//! 3. [`network`] trains a DeepONet — branch and trunk multilayer perceptrons
//!    combined by an inner product — on those trajectories.
//! 4. [`basis`] freezes the trunk functions at chosen times, orthonormalizes
//!    them through the square-root SVD route, and re-expands the result in
//!    orthonormal Legendre polynomials, yielding an evaluable, differentiable,
//!    hierarchical basis.
//! 5. [`approximation`] quantifies how well that basis approximates smooth
//!    targets (expansion-coefficient decay, projection errors, and an a
//!    priori error bound).
//! 6. [`galerkin`] evolves the PDEs in the custom basis with tau-style
//!    boundary enforcement and compares against the reference solvers.
//!
//! The `forge` binary drives the same steps from experiment config files; see
//! [`cli`].

pub mod error;
pub mod galerkin;
pub mod io;
pub mod approximation;
pub mod basis;
pub mod cli;
pub mod network;
pub mod quadrature;
pub mod random_fields;
pub mod reference;

pub use error::{Error, Result};
pub use quadrature::{LegendreBasis, QuadratureGrid, DEFAULT_DOMAIN};
