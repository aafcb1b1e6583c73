//! Numerical laboratory for the stochastic p-Laplace evolution equation
//!
//! ```text
//! du − div(|∇u|^{p−2}∇u) dt = Φ(u) dβ   on (0, T) × (0, X),   u = 0 on the boundary,
//! ```
//!
//! driven by a single real Brownian motion β, with a Lipschitz noise
//! coefficient Φ and merely integrable initial data.
//!
//! The crate is organised bottom-up:
//!
//! - [`truncations`]: closed-form truncation and renormalizer functions with
//!   exact first and second (weak) derivatives.
//! - [`mesh`]: 1-D Dirichlet grid, discrete gradient, regularized p-flux,
//!   rectangle quadrature and level-set integrals.
//! - [`solver`]: the implicit p-Laplace resolvent, solved as a strictly convex
//!   minimization with damped Newton.
//! - [`noise`]: noise coefficient models and runtime validation of the
//!   zero/Lipschitz/bound assumptions.
//! - [`sde`]: Brownian paths, the split-step Euler–Maruyama scheme, synchronous
//!   coupling and discrete Itô sums.
//! - [`initial`]: initial data generators and truncated approximations.
//! - [`estimators`]: the Monte Carlo harness and the verification estimators.
//! - [`config`] and [`cli`]: experiment files and the `plap` command line runner.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod initial;
pub mod mesh;
pub mod noise;
pub mod sde;
pub mod solver;
pub mod truncations;

pub use error::{Error, Result};
pub use mesh::{Flux, Grid1D, GridFunction};
pub use noise::NoiseModel;
pub use sde::{BrownianPath, Trajectory};
pub use truncations::{Jet, PiecewiseC2, Renormalizer};
