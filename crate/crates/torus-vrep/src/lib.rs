//! Ground states of few-fermion systems on the unit torus with
//! distributional external potentials, and the machinery around them:
//! membership tests for the density and potential spaces, an explicit
//! determinant witness for N-representability, and density-to-potential
//! inversion by Lieb maximization with duality-gap certificates.
//!
//! The crate is organized along the pipeline:
//!
//! - [`fourier`]: band-limited functions on 𝕋 = [0,1), transforms,
//!   Sobolev norms and pairings;
//! - [`spaces`]: densities (X, X_{>0}) and gauge-fixed H⁻¹ potential
//!   classes with minimal f + ∇g decompositions;
//! - [`manybody`]: antisymmetric plane-wave bases and exact assembly of
//!   the quadratic form of H = -½Δ + W + V;
//! - [`groundstate`]: block eigensolvers (dense and Davidson), KLMN
//!   kinetic bounds, coercivity checks;
//! - [`nrep`]: the Slater-determinant witness with prescribed density
//!   and its kinetic-energy bound;
//! - [`inversion`]: analytic single-particle inversion, Lieb
//!   maximization, ensemble matching and certificates;
//! - [`io`] / [`cli`]: schema JSON, CSV/SVG artifacts and the `vrep`
//!   binary driving all workflows.
//!
//! The examples directory is a runnable tour of each capability:
//! `cargo run --release --example lieb_maximization`, etc.

pub mod cli;
pub mod eigen;
pub mod error;
pub mod fourier;
pub mod groundstate;
pub mod inversion;
pub mod io;
pub mod manybody;
pub mod nrep;
pub mod quadrature;
pub mod spaces;

pub use error::{Error, Result};
pub use fourier::{Space, TorusFunction};
pub use manybody::{Interaction, ManyBodyState, ModelSpec, Spin};
pub use spaces::{DensityField, PotentialClass};
