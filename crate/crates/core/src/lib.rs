//! Discrete parabolic equations in random space-time environments.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: periodic cubes, discrete calculus, exact heat kernels;
//! - [`env`]: Langevin and Gaussian field samplers and coefficient maps;
//! - [`parabolic`]: forward and backward solvers, Green's functions, resolvents;
//! - [`homogenize`]: correctors, `q(ξ,η)`, the homogenized matrix and rate fits;
//! - [`field`]: correlation, Malliavin and Poincaré checks for the field dynamics;
//! - [`sde`]: the finite-dimensional convex diffusion.

pub mod env;
pub mod field;
pub mod error;
pub mod homogenize;
pub mod lattice;
pub mod matrix;
pub mod parabolic;
pub mod quad;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/lattice.md")]
    struct Lattice;
    #[doc = include_str!("../../../book/src/environments.md")]
    struct Environments;
    #[doc = include_str!("../../../book/src/parabolic.md")]
    struct Parabolic;
    #[doc = include_str!("../../../book/src/homogenization.md")]
    struct Homogenization;
    #[doc = include_str!("../../../book/src/field.md")]
    struct Field;
    #[doc = include_str!("../../../book/src/sde.md")]
    struct Sde;
}
pub use lattice::PeriodicCube;
pub use matrix::{EllipticityPair, SymMatrix};
