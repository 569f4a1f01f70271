//! Monte Carlo laboratory for stochastic gradient iterates and their
//! Ornstein-Uhlenbeck scaling limits.
//!
//! The crate simulates univariate SGD/SGLD on generalized linear losses,
//! simulates the matching OU diffusion exactly, estimates distances between
//! the two path laws through smooth functionals and metric surrogates, and
//! evaluates the quantitative error-bound formulas that predict how fast the
//! gap closes as the step size shrinks.

pub mod assumptions;
pub mod bounds;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod functionals;
pub mod glm;
pub mod ou;
pub mod rng;
pub mod sgld;
pub mod stats;

pub use config::{AlgoConfig, Setting};
pub use error::{Error, Result};
