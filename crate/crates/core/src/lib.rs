//! Simulation and verification lab for the stochastic heat equation
//!
//! ```text
//! ∂_t u = ∂_xx u + b(u) + σ Ẇ(t, x),   (t, x) ∈ (0, T] × [0, 1]
//! ```
//!
//! with Neumann or Dirichlet boundary conditions, additive space-time white
//! noise, and its accelerated exponential Euler approximation `u^δ` in which
//! the drift is frozen at the left endpoint of every step of length `δ`.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: heat kernel on ℝ and Green functions on `[0, 1]`, each
//!   evaluated by image sums and by eigen-expansions with certified truncation.
//! - [`spectral`]: eigen-coefficients ↔ midpoint collocation grid, and the
//!   projection of the pointwise drift onto the basis.
//! - [`noise`]: counter-based, order-independent sampling of the mode-wise
//!   stochastic-convolution increments, and exact fine → coarse aggregation.
//! - [`scheme`]: the perturbed one-step map, coupled reference paths and
//!   the exact Gaussian laws available when the drift is affine.
//! - [`density`]: Gaussian mollifier, kernel density estimates, sup-norm and
//!   total-variation distances.
//! - [`experiments`]: convergence-order studies and small-time asymptotics.
//! - [`config`], [`report`], [`selftest`]: the command-line front end.

pub mod config;
pub mod density;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod noise;
pub mod quad;
pub mod report;
pub mod scheme;
pub mod selftest;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::{BoundaryCondition, KernelParams, KernelPoint};
pub use scheme::{Drift, GaussianLaw, InitialDatum, ModelSpec, SchemeConfig};
pub use spectral::{GridFunction, ModeVector};

/// Version of every file format written by this crate.
pub const SCHEMA_VERSION: u32 = 1;
