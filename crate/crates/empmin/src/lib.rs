//! Empirical minimization laboratory: sample-average objectives built from
//! noisy observations, exact Wasserstein-1 distances between empirical
//! measures, deterministic minimizers and replicated convergence-rate
//! studies.
//!
//! The crate is organized around five modules:
//!
//! * [`measures`] — empirical measures, i.i.d. sampling, moments, exact W1
//!   distances and the dimension-dependent rate function.
//! * [`payoffs`] — Black-Scholes basket payoffs with a closed-form 1-D
//!   pricing oracle and a growth-condition probe.
//! * [`objectives`] — objective families v(x, z) (importance sampling,
//!   NN regression, quadratic), the empirical objective V_n and the
//!   translated estimator machinery.
//! * [`optim`] — deterministic Newton / gradient-descent minimization with
//!   Armijo backtracking and seeded multistart.
//! * [`experiments`] — reference minima, replicated rate studies, log-log
//!   slope fits, the minimum-gap inequality checker and W1 rate studies.

pub mod error;
pub mod experiments;
pub mod measures;
pub mod objectives;
pub mod optim;
pub mod payoffs;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
