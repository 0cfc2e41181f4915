//! Direct-summation gravitational N-body engine.
//!
//! The integrator is a fourth-order Hermite predictor-corrector with
//! individual block time steps; forces come from a direct O(N^2) kernel with
//! a 64-bit reference backend and a 32-bit "stream" backend that emulates a
//! graphics-style accelerator (single-precision arithmetic, whole-system
//! transfer per block step). Alongside the dynamics sit equal-mass Plummer
//! initial conditions, run diagnostics, and an analytic performance model of
//! the host/accelerator cost split.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod force;
pub mod hermite;
pub mod perf;
pub mod plummer;
pub mod snapshot;
pub mod system;
pub mod vec3;

pub use config::{Backend, SimConfig};
pub use error::{Error, Result};
pub use system::ParticleSystem;
pub use vec3::Vector3;
