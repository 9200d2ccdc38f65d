//! Simulation kernels for stochastic gradient descent with momentum.
//!
//! The crate covers noisy gradient oracles on analytic landscapes, SGD and
//! SGDM updates under explicit schedules, the averaged-learning-rate coupling
//! between them, Euler–Maruyama integration of their continuous-time limits,
//! and the ensemble statistics used to compare all of these.

pub mod analysis;
pub mod coupling;
pub mod error;
pub mod landscape;
pub mod linalg;
pub mod ngos;
pub mod optim;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
