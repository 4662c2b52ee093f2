//! Numerical core for the attraction-repulsion Keller-Segel system
//!
//! ```text
//!   u_t     = Δu − χ∇·(u∇v) + ξ∇·(u∇w)
//!   τ v_t   = Δv + αu − βv
//!   τ w_t   = Δw + γu − δw
//! ```
//!
//! on a bounded domain with zero-flux boundaries, starting from measure-valued
//! `u₀` (Dirac atoms plus an optional density).
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`model`]: parameters, the derived `ζ`/`σ` combinations, and scenario classification
//! - [`grid`]: cell-centered grids (interval, rectangle, radial disk/ball) and discrete calculus
//! - [`semigroup`]: the discrete Neumann heat semigroup `e^{t(Δ−κ)}`
//! - [`elliptic`]: Neumann Helmholtz solves, spectral and conjugate gradient
//! - [`initial_data`]: measure/density data and heat-semigroup mollification
//! - [`stepper`]: the IMEX finite-volume time stepper and the adaptive run loop
//! - [`diagnostics`]: tracked functionals, decay fits and verdicts
//!
//! IO, file formats and orchestration live in the companion `kslab` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod elliptic;
mod error;
pub mod grid;
pub mod initial_data;
mod linalg;
pub mod model;
pub mod semigroup;
pub mod stepper;
mod transform;

pub use error::{Error, Result};
pub use grid::{Field, Geometry, Grid};
pub use model::{ChemicalMode, DerivedParams, ModelParams, Scenario, ScenarioConfig};
