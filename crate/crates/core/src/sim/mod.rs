//! Monte Carlo and deterministic integrators.
//!
//! - [`noise`]: reproducible Wiener increments split into independent streams,
//!   plus the statistics used to validate them.
//! - [`path`]: Euler–Maruyama first-exit simulation of the `Y` equation and
//!   ensembles over many streams.
//! - [`ode`]: the decoupled `X` equation and the raw `(φ, H, f)` system.

pub mod noise;
pub mod ode;
pub mod path;

pub use noise::{wiener_increments, NoiseProcess, NoiseStream};
pub use ode::{
    integrate_normalized_system, integrate_raw_system, integrate_x_ode, NormalizedPoint, RawPoint,
    RawTermination, RawTrajectory, XOdeResult, XTermination,
};
pub use path::{
    simulate_ensemble, simulate_path, Outcome, PathConfig, PathEnsembleStats, PathResult,
};
