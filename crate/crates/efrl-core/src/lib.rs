//! Evolve-Filter regularization for 2D incompressible flow on a periodic
//! grid, with a deep-Q-network agent selecting the filter radius at every
//! time step.
//!
//! The crate is organized around the simulation pipeline:
//!
//! - [`fields`]: periodic-grid fields, FFTs, spectral calculus, Leray projection
//! - [`solver`]: the Evolve step, the Stokes differential filter, turbulence init
//! - [`metrics`]: energy, enstrophy, shell spectra, global error metrics
//! - [`rewards`]: reward formulas and per-step diagnostics
//! - [`env`]: the episodic control environment wrapping EF stepping
//! - [`dqn`]: from-scratch Q-network, replay, Adam, training loop
//! - [`config`]: run configuration, profiles, key=value config files

pub mod config;
pub mod dqn;
pub mod env;
mod error;
pub mod fields;
pub mod metrics;
pub mod rewards;
pub mod solver;

pub use error::{Error, Result};
