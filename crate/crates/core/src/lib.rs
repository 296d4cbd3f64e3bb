//! Simulation and pathwise integration for Lévy-driven Volterra processes
//! `Y(t) = ∫_0^t g(t - s) dL(s)` and their kernel-perturbed semimartingale
//! approximations `Y^ε` with `g^ε(u) = g(u + ε)`.

pub mod conditions;
pub mod error;
pub mod fracderiv;
pub mod integrate;
pub mod kernels;
pub mod levy;
pub mod quad;
pub mod rng;
pub mod volterra;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
