//! Structure-preserving stochastic Galerkin (SP-SG) solver for Fokker-Planck
//! equations whose drift comes from interaction with a background distribution.
//!
//! The random input enters through the initial condition only. A truncated
//! generalized polynomial chaos expansion turns the uncertain problem into
//! `M + 1` decoupled deterministic Fokker-Planck equations sharing one drift
//! field, which are discretized with an exponential-fitting finite-volume
//! scheme: per-interface weights are built from a quadrature of the
//! drift/diffusion ratio so that the numerical flux vanishes on the
//! quasi-steady state. The schemes conserve mass, keep projections
//! nonnegative under explicit/semi-implicit step bounds, and dissipate the
//! discrete relative entropy.
//!
//! Modules:
//! - [`gpc`]: orthonormal Legendre basis, projection, moment reconstruction
//! - [`grid`]: uniform cell-centered grids and trapezoidal sums
//! - [`quadrature`]: open Newton-Cotes and Gauss-Legendre rules
//! - [`model`]: interaction kernels, diffusion laws, background distributions
//! - [`scheme`]: flux weights, numerical fluxes, conservative divergence
//! - [`stepping`]: explicit and semi-implicit time integrators with bounds
//! - [`problems`]: the opinion, advected-background and 2D swarming setups
//! - [`diagnostics`]: masses, norms, relative entropy, convergence orders
//! - [`config`], [`runner`], [`study`]: CLI-facing orchestration and output

// validation guards use `!(x > 0.0)` on purpose: the negation also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod gpc;
pub mod grid;
pub mod model;
pub mod problems;
pub mod quadrature;
pub mod runner;
pub mod scheme;
pub mod stepping;
pub mod study;
