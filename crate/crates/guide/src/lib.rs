//! The book under `book/` is the user guide; mdBook cannot run its code
//! fences as tests, so each chapter is included here as rustdoc and
//! `cargo test --doc -p guide` executes every snippet. If a chapter and the
//! library drift apart, the build goes red.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/quadrature.md")]
pub mod quadrature {}

#[doc = include_str!("../../../book/src/random-fields.md")]
pub mod random_fields {}

#[doc = include_str!("../../../book/src/reference-solvers.md")]
pub mod reference_solvers {}

#[doc = include_str!("../../../book/src/operator-networks.md")]
pub mod operator_networks {}

#[doc = include_str!("../../../book/src/basis-extraction.md")]
pub mod basis_extraction {}

#[doc = include_str!("../../../book/src/approximation.md")]
pub mod approximation {}

#[doc = include_str!("../../../book/src/galerkin.md")]
pub mod galerkin {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
