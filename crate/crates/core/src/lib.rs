//! Stability certification for continuous-time Takagi–Sugeno fuzzy systems.
//!
//! A [`model::FuzzyModel`] is turned into an [`lmi::LmiProblem`] by one of the
//! builders in [`conditions`], solved by [`sdp::solve`], and the resulting
//! Lyapunov function is used to size a domain-of-attraction estimate in
//! [`regions`]. [`search`] runs hyperparameter bisection and parameter sweeps,
//! [`verify`] audits certified sets by simulation.

pub mod conditions;
pub mod error;
pub mod lmi;
pub mod model;
pub mod regions;
pub mod reproduce;
pub mod sdp;
pub mod search;
pub mod verify;

pub use error::{Error, Result};
