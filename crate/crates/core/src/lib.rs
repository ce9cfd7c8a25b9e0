//! Online linear programming toolkit: request distributions, fluid and
//! hindsight duals, the certainty-equivalent re-solving policy, degeneracy
//! diagnostics and a Monte Carlo regret harness.

pub mod cli;
pub mod degeneracy;
pub mod distributions;
pub mod error;
pub mod fluid_dual;
pub mod harness;
pub mod hindsight;
pub mod lp;
pub mod policy;
pub mod quadrature;
pub mod rng;

pub use error::{OlpError, Result};
