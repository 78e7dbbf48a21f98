//! Optimal H-infinity static state feedback for plants `x' = a x + b u + w`
//! with symmetric Hurwitz `a`.
//!
//! The closed-form gain `l = b^T a^{-1}` attains the smallest achievable
//! norm from `w` to `(x, u)`, namely `1 / sqrt(lambda_min(a^2 + b b^T))`.
//! The crate computes it, checks it against two independent oracles
//! (Hamiltonian norm bisection and a Riccati gamma iteration), and provides
//! the positivity, coordination and simulation tools around it.

pub mod cli;
pub mod error;
pub mod hinfnorm;
pub mod linalg;
pub mod model;
pub mod positivity;
pub mod riccati;
pub mod simulate;
pub mod synthesis;

pub use error::{Error, Result};
pub use model::{CostWeights, GainMatrix, LtiSystem, StateSpace, Tolerances};
