//! Explosion analysis for the stochastic-inflation equation
//!
//! ```text
//! dY = (Y² − 1)(3Y + λ) dτ + dW,   −1 ≤ Y ≤ 1
//! ```
//!
//! The crate decides whether solutions leave the physical state space in
//! finite time, both analytically (Feller's explosion test, evaluated with
//! log-domain quadrature so that integrands of size `exp(10⁴)` and beyond stay
//! representable) and empirically (Euler–Maruyama first-exit ensembles).
//! It also carries the expansion-normalized FLRW model the equation comes
//! from, plus Lipschitz and singularity diagnostics for the drift and for the
//! companion `X` equation.
//!
//! Modules:
//! - [`model`]: potentials, raw and normalized states, SDE coefficients.
//! - [`log_value`] and [`quadrature`]: extended-range arithmetic and adaptive
//!   Gauss–Kronrod integration of `exp(log f)`.
//! - [`feller`]: scale function, speed integral, boundary limits, verdicts.
//! - [`sim`]: noise streams, first-exit Monte Carlo, ODE integrators.
//! - [`lipschitz`]: local constants, global falsification, `f′(X)` report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feller;
pub mod lipschitz;
pub mod log_value;
pub mod model;
mod parallel;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};
pub use log_value::LogValue;
