//! Maximum-likelihood estimation for stochastic differential mixed-effects
//! models.
//!
//! Transition densities come from closed-form Hermite expansions on the
//! Lamperti scale, unit-level random effects are integrated out with a
//! Laplace approximation whose Hessians are exact forward-mode derivatives,
//! and population parameters are found by a bounded Nelder-Mead search.

pub mod density;
pub mod dists;
pub mod dual;
pub mod error;
pub mod estimate;
pub mod expansion;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use error::{DomainError, Error, Result};
pub use scalar::Scalar;
